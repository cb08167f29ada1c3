import { describe, expect, it } from "vitest";
import { ConfigInput } from "../src/types.js";
import { CHANNELS_5GHZ, isCanonicalMac, isValid, validateConfig } from "../src/validate.js";

function input(overrides: Partial<ConfigInput> = {}): ConfigInput {
	return {
		name: "room",
		description: "",
		band: 2.4,
		bandwidth: 20,
		channel: 6,
		device_filter: [],
		...overrides,
	};
}

describe("validateConfig", () => {
	it("accepts the canonical 2.4 GHz example", () => {
		expect(validateConfig(input())).toEqual({});
	});

	it.each([
		[2.4, 20],
		[2.4, 40],
		[5, 40],
		[5, 80],
	])("accepts band %s with bandwidth %s", (band, bandwidth) => {
		const channel = band === 2.4 ? 6 : 36;
		expect(validateConfig(input({ band, bandwidth, channel }))).toEqual({});
	});

	it.each([
		[2.4, 80],
		[2.4, 10],
		[5, 20],
		[5, 160],
	])("rejects band %s with bandwidth %s", (band, bandwidth) => {
		const channel = band === 2.4 ? 6 : 36;
		const errors = validateConfig(input({ band, bandwidth, channel }));
		expect(errors.bandwidth).toMatch(/requires bandwidth/);
	});

	it("accepts every listed 5 GHz channel", () => {
		for (const channel of CHANNELS_5GHZ) {
			expect(validateConfig(input({ band: 5, bandwidth: 40, channel }))).toEqual({});
		}
	});

	it.each([0, 14, 34, 99, 166])("rejects 5 GHz channel %s", (channel) => {
		const errors = validateConfig(input({ band: 5, bandwidth: 40, channel }));
		expect(errors.channel).toBeDefined();
	});

	it.each([0, 14, -1])("rejects 2.4 GHz channel %s", (channel) => {
		expect(validateConfig(input({ channel })).channel).toMatch(/1 to 13/);
	});

	it("rejects unknown bands", () => {
		expect(validateConfig(input({ band: 6 })).band).toMatch(/2\.4 or 5/);
	});

	it("rejects fractional bandwidth and channel", () => {
		expect(validateConfig(input({ bandwidth: 20.5 })).bandwidth).toBeDefined();
		expect(validateConfig(input({ channel: 6.5 })).channel).toBeDefined();
	});

	it.each(["", "-room", ".hidden", "a b", "a/b", "x".repeat(65)])(
		"rejects name %j",
		(name) => {
			expect(validateConfig(input({ name })).name).toBeDefined();
		},
	);

	it.each(["room", "Room-2", "a.b_c", "x".repeat(64)])(
		"accepts name %j",
		(name) => {
			expect(validateConfig(input({ name })).name).toBeUndefined();
		},
	);

	it("rejects malformed device filter entries and names the culprit", () => {
		const errors = validateConfig(input({
			device_filter: ["aa:bb:cc:dd:ee:ff", "AA:BB:CC:DD:EE:FF"],
		}));
		expect(errors.device_filter).toContain("AA:BB:CC:DD:EE:FF");
	});

	it("accepts a filter of canonical MACs", () => {
		const macs = ["aa:bb:cc:dd:ee:ff", "02:00:00:00:00:01"];
		expect(validateConfig(input({ device_filter: macs }))).toEqual({});
	});
});

describe("isCanonicalMac", () => {
	it.each(["aa:bb:cc:dd:ee:ff", "00:11:22:33:44:55"])("accepts %s", (mac) => {
		expect(isCanonicalMac(mac)).toBe(true);
	});

	it.each([
		"AA:bb:cc:dd:ee:ff",
		"aa-bb-cc-dd-ee-ff",
		"aa:bb:cc:dd:ee",
		"aa:bb:cc:dd:ee:ff:00",
		"aabbccddeeff",
		"",
	])("rejects %j", (mac) => {
		expect(isCanonicalMac(mac)).toBe(false);
	});
});

describe("isValid", () => {
	it("matches the emptiness of the error map", () => {
		expect(isValid(input())).toBe(true);
		expect(isValid(input({ bandwidth: 80 }))).toBe(false);
	});
});
