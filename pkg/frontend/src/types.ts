export type ConfigStatus = "running" | "stopped";

export interface CaptureConfig {
	name: string;
	description: string;
	band: number;
	bandwidth: number;
	channel: number;
	device_filter: string[];
	status: ConfigStatus;
}

// What the forms produce; status is owned by the server.
export type ConfigInput = Omit<CaptureConfig, "status">;
