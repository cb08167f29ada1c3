import { ConfigInput } from "./types.js";

// Client-side mirror of the control service's configuration rules. The
// server stays authoritative; this only exists so bad combinations are
// flagged inline before a request is made.

export const BANDS = [2.4, 5] as const;

export const BANDWIDTHS: Record<string, number[]> = {
	"2.4": [20, 40],
	"5": [40, 80],
};

export const CHANNELS_24GHZ = Array.from({ length: 13 }, (_, i) => i + 1);

export const CHANNELS_5GHZ = [
	36, 40, 44, 48, 52, 56, 60, 64,
	100, 104, 108, 112, 116, 120, 124, 128, 132, 136, 140, 144,
	149, 153, 157, 161, 165,
];

const NAME_RE = /^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$/;
const MAC_RE = /^[0-9a-f]{2}(:[0-9a-f]{2}){5}$/;

export type FieldErrors = Partial<Record<keyof ConfigInput, string>>;

export function bandKey(band: number): string {
	return band === 2.4 ? "2.4" : String(band);
}

export function channelChoices(band: number): number[] {
	return band === 2.4 ? CHANNELS_24GHZ : CHANNELS_5GHZ;
}

export function isCanonicalMac(mac: string): boolean {
	return MAC_RE.test(mac);
}

export function validateConfig(input: ConfigInput): FieldErrors {
	const errors: FieldErrors = {};
	if (!NAME_RE.test(input.name)) {
		errors.name = "name must be 1 to 64 letters, digits, '.', '_' or '-', starting with a letter or digit";
	}
	const widths = BANDWIDTHS[bandKey(input.band)];
	if (!widths) {
		errors.band = "band must be 2.4 or 5";
	} else {
		if (!Number.isInteger(input.bandwidth) || !widths.includes(input.bandwidth)) {
			errors.bandwidth = `band ${input.band} requires bandwidth ${widths.join(" or ")} MHz`;
		}
		if (!Number.isInteger(input.channel) || !channelChoices(input.band).includes(input.channel)) {
			errors.channel = input.band === 2.4
				? "band 2.4 requires channel 1 to 13"
				: "channel is not a valid 5 GHz channel";
		}
	}
	const bad = input.device_filter.find((mac) => !isCanonicalMac(mac));
	if (bad !== undefined) {
		errors.device_filter = `not a canonical MAC address: "${bad}" (expected aa:bb:cc:dd:ee:ff)`;
	}
	return errors;
}

export function isValid(input: ConfigInput): boolean {
	return Object.keys(validateConfig(input)).length === 0;
}
