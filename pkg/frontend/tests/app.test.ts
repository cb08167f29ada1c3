import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ControlApi } from "../src/api.js";
import { App } from "../src/app.js";
import { ConfigInput } from "../src/types.js";
import { FakeControlService } from "./fake-service.js";

let fake: FakeControlService;
let app: App;
let root: HTMLElement;
let saved: { filename: string; blob: Blob }[];

beforeEach(async () => {
	vi.useFakeTimers();
	document.body.innerHTML = `<div id="app"></div>`;
	root = document.getElementById("app") as HTMLElement;
	fake = new FakeControlService();
	saved = [];
	app = new App(root, new ControlApi(fake.fetch), {
		saveFile: (filename, blob) => saved.push({ filename, blob }),
	});
	await app.start();
});

afterEach(() => {
	app.stop();
	vi.useRealTimers();
	vi.unstubAllGlobals();
});

function el<T extends HTMLElement>(selector: string): T {
	const node = root.querySelector(selector);
	if (!node) throw new Error(`no element matching ${selector}`);
	return node as T;
}

function rowButton(name: string, action: string): HTMLButtonElement {
	return el(`tr[data-name="${name}"] .${action}`);
}

function statusOf(name: string): string {
	return el(`tr[data-name="${name}"] .status`).textContent ?? "";
}

function setField(name: string, value: string): void {
	const form = el<HTMLFormElement>("#config-form");
	const field = form.elements.namedItem(name) as HTMLInputElement | HTMLSelectElement;
	field.value = value;
	field.dispatchEvent(new Event("change", { bubbles: true }));
}

function submitForm(): void {
	el<HTMLFormElement>("#config-form").dispatchEvent(
		new Event("submit", { bubbles: true, cancelable: true }),
	);
}

function openFormWith(name: string, band: string, bandwidth: string, channel: string): void {
	el<HTMLButtonElement>("#new-config").click();
	setField("name", name);
	setField("band", band);
	setField("bandwidth", bandwidth);
	setField("channel", channel);
}

const INPUT: ConfigInput = {
	name: "room",
	description: "",
	band: 2.4,
	bandwidth: 20,
	channel: 6,
	device_filter: [],
};

async function flushMicrotasks(): Promise<void> {
	await vi.advanceTimersByTimeAsync(0);
}

describe("capture workflow", () => {
	it("creates, starts, observes running, stops, downloads a nonempty CSV", async () => {
		openFormWith("door", "2.4", "20", "6");
		submitForm();
		await app.idle();

		expect(el<HTMLFormElement>("#config-form").hidden).toBe(true);
		expect(statusOf("door")).toBe("stopped");

		rowButton("door", "act-start").click();
		await app.idle();
		let polls = 0;
		while (statusOf("door") !== "running" && polls < 3) {
			await vi.advanceTimersByTimeAsync(2000);
			await app.idle();
			polls += 1;
		}
		expect(statusOf("door")).toBe("running");
		expect(polls).toBeLessThanOrEqual(3);

		rowButton("door", "act-stop").click();
		await app.idle();
		expect(statusOf("door")).toBe("stopped");

		rowButton("door", "act-download").click();
		await app.idle();
		expect(saved).toHaveLength(1);
		expect(saved[0]?.filename).toBe("door.csv");
		const text = await saved[0]?.blob.text() ?? "";
		expect(text.length).toBeGreaterThan(0);
		expect(text.trim().split("\n").length).toBeGreaterThan(2);
	});

	it("blocks an invalid band/bandwidth combination before submit", async () => {
		openFormWith("bad", "2.4", "80", "6");

		const note = el(`#config-form .field-error[data-for="bandwidth"]`);
		expect(note.hidden).toBe(false);
		expect(note.textContent).toMatch(/bandwidth 20 or 40/);

		submitForm();
		await app.idle();
		expect(fake.requests.filter((r) => r === "POST /configs")).toHaveLength(0);
		expect(el<HTMLFormElement>("#config-form").hidden).toBe(false);
		expect(fake.configs.has("bad")).toBe(false);
	});

	it("is also rejected by the server when the client gate is bypassed", async () => {
		const api = new ControlApi(fake.fetch);
		await expect(api.create({ ...INPUT, name: "bad", bandwidth: 80 }))
			.rejects.toMatchObject({ status: 400, message: /bandwidth 20 or 40/ });
	});
});

describe("status polling", () => {
	it("picks up server-side status changes without user action", async () => {
		fake.configs.set("bg", { ...INPUT, name: "bg", status: "stopped" });
		await vi.advanceTimersByTimeAsync(2000);
		expect(statusOf("bg")).toBe("stopped");

		const config = fake.configs.get("bg");
		if (config) config.status = "running";
		await vi.advanceTimersByTimeAsync(2000);
		expect(statusOf("bg")).toBe("running");

		if (config) config.status = "stopped";
		await vi.advanceTimersByTimeAsync(2000);
		expect(statusOf("bg")).toBe("stopped");
	});

	it("shows a banner while the service is unreachable and clears it after", async () => {
		let down = true;
		const flaky = new ControlApi((url, init) => {
			if (down) return Promise.reject(new Error("connection refused"));
			return fake.fetch(url, init);
		});
		const other = new App(root, flaky, {});
		await other.start();
		const banner = el("#banner");
		expect(banner.hidden).toBe(false);
		expect(banner.textContent).toMatch(/unreachable/);
		down = false;
		await vi.advanceTimersByTimeAsync(2000);
		expect(banner.hidden).toBe(true);
		other.stop();
	});
});

describe("configuration management", () => {
	it("disables edit and delete while running, with a tooltip", async () => {
		openFormWith("live", "2.4", "20", "6");
		submitForm();
		await app.idle();
		rowButton("live", "act-start").click();
		await app.idle();

		for (const action of ["act-edit", "act-delete"]) {
			const button = rowButton("live", action);
			expect(button.disabled).toBe(true);
			expect(button.title).toBe("stop the capture first");
		}
		expect(rowButton("live", "act-start").disabled).toBe(true);
		expect(rowButton("live", "act-stop").disabled).toBe(false);
	});

	it("edits a stopped configuration through a full-document replace", async () => {
		openFormWith("edit-me", "2.4", "20", "6");
		submitForm();
		await app.idle();

		rowButton("edit-me", "act-edit").click();
		const nameField = el<HTMLInputElement>(`#config-form input[name="name"]`);
		expect(el<HTMLFormElement>("#config-form").hidden).toBe(false);
		expect(nameField.value).toBe("edit-me");
		expect(nameField.disabled).toBe(true);

		setField("channel", "11");
		submitForm();
		await app.idle();
		expect(fake.configs.get("edit-me")?.channel).toBe(11);
		expect(fake.requests).toContain("PUT /configs/edit-me");
	});

	it("deletes a configuration after confirmation", async () => {
		vi.stubGlobal("confirm", vi.fn(() => true));
		openFormWith("gone", "2.4", "20", "6");
		submitForm();
		await app.idle();
		rowButton("gone", "act-delete").click();
		await app.idle();
		expect(fake.configs.has("gone")).toBe(false);
		expect(root.querySelector(`tr[data-name="gone"]`)).toBeNull();
	});

	it("keeps the form open and shows the server detail on a duplicate name", async () => {
		openFormWith("twice", "2.4", "20", "6");
		submitForm();
		await app.idle();
		openFormWith("twice", "2.4", "20", "6");
		submitForm();
		await app.idle();
		const note = el("#form-error");
		expect(el<HTMLFormElement>("#config-form").hidden).toBe(false);
		expect(note.hidden).toBe(false);
		expect(note.textContent).toMatch(/already exists/);
	});

	it("collects MAC filter rows and normalizes their case", async () => {
		openFormWith("filtered", "2.4", "20", "6");
		el<HTMLButtonElement>("#add-mac").click();
		el<HTMLButtonElement>("#add-mac").click();
		const inputs = root.querySelectorAll<HTMLInputElement>(".mac-input");
		const first = inputs[0];
		const second = inputs[1];
		if (!first || !second) throw new Error("expected two MAC rows");
		first.value = "AA:BB:CC:DD:EE:FF";
		first.dispatchEvent(new Event("change", { bubbles: true }));
		second.value = "02:00:00:00:00:01";
		second.dispatchEvent(new Event("change", { bubbles: true }));
		submitForm();
		await app.idle();
		expect(fake.configs.get("filtered")?.device_filter)
			.toEqual(["aa:bb:cc:dd:ee:ff", "02:00:00:00:00:01"]);
	});

	it("flags a malformed MAC inline and removes the row on request", async () => {
		openFormWith("macs", "2.4", "20", "6");
		el<HTMLButtonElement>("#add-mac").click();
		const input = root.querySelector<HTMLInputElement>(".mac-input");
		if (!input) throw new Error("expected a MAC row");
		input.value = "not-a-mac";
		input.dispatchEvent(new Event("change", { bubbles: true }));
		const note = el(`#config-form .field-error[data-for="device_filter"]`);
		expect(note.hidden).toBe(false);
		expect(note.textContent).toContain("not-a-mac");

		el<HTMLButtonElement>(".remove-mac").click();
		expect(root.querySelector(".mac-input")).toBeNull();
		expect(note.hidden).toBe(true);
	});

	it("shows the collector's error on a failed download", async () => {
		openFormWith("empty", "2.4", "20", "6");
		submitForm();
		await app.idle();
		rowButton("empty", "act-download").click();
		await app.idle();
		const note = el(`tr[data-name="empty"] .row-error`);
		expect(note.textContent).toMatch(/no capture file/);
		expect(saved).toHaveLength(0);
	});
});

describe("request serialization", () => {
	it("locks a configuration's row while its request is in flight, others stay live", async () => {
		openFormWith("alpha", "2.4", "20", "6");
		submitForm();
		await app.idle();
		openFormWith("beta", "2.4", "20", "6");
		submitForm();
		await app.idle();

		const release = fake.holdNext("POST /configs/alpha/start");
		rowButton("alpha", "act-start").click();
		await flushMicrotasks();
		rowButton("beta", "act-start").click();
		await flushMicrotasks();

		expect(statusOf("beta")).toBe("running");
		expect(statusOf("alpha")).toBe("stopped");
		expect(rowButton("alpha", "act-stop").disabled).toBe(true);
		expect(rowButton("alpha", "act-download").disabled).toBe(true);

		release();
		await app.idle();
		expect(statusOf("alpha")).toBe("running");
		expect(rowButton("alpha", "act-stop").disabled).toBe(false);
	});
});
