import { CaptureConfig, ConfigInput } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
	constructor(readonly status: number, detail: string) {
		super(detail);
		this.name = "ApiError";
	}
}

async function errorDetail(response: Response): Promise<string> {
	try {
		const body = await response.json();
		if (body && typeof body.detail === "string") return body.detail;
	} catch {
		// non-JSON error body; fall through to the status line
	}
	return `request failed with status ${response.status}`;
}

export class ControlApi {
	constructor(
		private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
		private readonly base = "",
	) {}

	private async request(path: string, init?: RequestInit): Promise<Response> {
		const response = await this.fetchImpl(this.base + path, init);
		if (!response.ok) {
			throw new ApiError(response.status, await errorDetail(response));
		}
		return response;
	}

	private json(input: ConfigInput): RequestInit {
		return {
			method: "POST",
			headers: { "content-type": "application/json" },
			body: JSON.stringify(input),
		};
	}

	async health(): Promise<{ status: string; broker_connected: boolean }> {
		return (await this.request("/healthz")).json();
	}

	async list(): Promise<CaptureConfig[]> {
		return (await this.request("/configs")).json();
	}

	async create(input: ConfigInput): Promise<CaptureConfig> {
		return (await this.request("/configs", this.json(input))).json();
	}

	async replace(name: string, input: ConfigInput): Promise<CaptureConfig> {
		const init = { ...this.json(input), method: "PUT" };
		return (await this.request(`/configs/${encodeURIComponent(name)}`, init)).json();
	}

	async remove(name: string): Promise<void> {
		await this.request(`/configs/${encodeURIComponent(name)}`, { method: "DELETE" });
	}

	async start(name: string): Promise<CaptureConfig> {
		return (await this.request(`/configs/${encodeURIComponent(name)}/start`, { method: "POST" })).json();
	}

	async stop(name: string): Promise<CaptureConfig> {
		return (await this.request(`/configs/${encodeURIComponent(name)}/stop`, { method: "POST" })).json();
	}

	async output(name: string): Promise<Blob> {
		return (await this.request(`/configs/${encodeURIComponent(name)}/output`)).blob();
	}
}
