import { ApiError, ControlApi } from "./api.js";
import { CaptureConfig, ConfigInput } from "./types.js";
import { BANDS, BANDWIDTHS, bandKey, channelChoices, validateConfig } from "./validate.js";

export interface AppOptions {
	pollMs?: number;
	saveFile?: (filename: string, blob: Blob) => void;
}

const RUNNING_TOOLTIP = "stop the capture first";

function esc(text: string): string {
	return text
		.replace(/&/g, "&amp;")
		.replace(/</g, "&lt;")
		.replace(/>/g, "&gt;")
		.replace(/"/g, "&quot;");
}

function errorText(err: unknown): string {
	if (err instanceof ApiError) return err.message;
	if (err instanceof Error) return `control service unreachable (${err.message})`;
	return String(err);
}

function saveBlobViaAnchor(filename: string, blob: Blob): void {
	const url = URL.createObjectURL(blob);
	const anchor = document.createElement("a");
	anchor.href = url;
	anchor.download = filename;
	document.body.appendChild(anchor);
	anchor.click();
	anchor.remove();
	URL.revokeObjectURL(url);
}

export class App {
	private readonly pollMs: number;
	private readonly saveFile: (filename: string, blob: Blob) => void;
	private configs: CaptureConfig[] = [];
	// one request at a time per configuration; distinct names run concurrently
	private readonly chains = new Map<string, Promise<void>>();
	private readonly pending = new Set<string>();
	private readonly rowErrors = new Map<string, string>();
	private readonly touched = new Set<string>();
	private editing: string | null = null;
	private timer: ReturnType<typeof setInterval> | null = null;

	constructor(
		private readonly root: HTMLElement,
		private readonly api: ControlApi,
		options: AppOptions = {},
	) {
		this.pollMs = options.pollMs ?? 2000;
		this.saveFile = options.saveFile ?? saveBlobViaAnchor;
	}

	async start(): Promise<void> {
		this.renderSkeleton();
		await this.refresh();
		this.timer = setInterval(() => void this.refresh(), this.pollMs);
	}

	stop(): void {
		if (this.timer !== null) clearInterval(this.timer);
		this.timer = null;
	}

	/** Settles once every in-flight action (and its refresh) is done. */
	async idle(): Promise<void> {
		for (;;) {
			const inFlight = [...this.chains.values()];
			await Promise.allSettled(inFlight);
			if ([...this.chains.values()].every((p) => inFlight.includes(p))) return;
		}
	}

	async refresh(): Promise<void> {
		const banner = this.el("banner");
		try {
			this.configs = await this.api.list();
			banner.hidden = true;
		} catch (err) {
			banner.textContent = errorText(err);
			banner.hidden = false;
		}
		this.renderList();
	}

	// -- layout ----------------------------------------------------------

	private el<T extends HTMLElement = HTMLElement>(id: string): T {
		const node = this.root.querySelector(`#${id}`);
		if (!node) throw new Error(`missing element #${id}`);
		return node as T;
	}

	private renderSkeleton(): void {
		const bandOptions = BANDS
			.map((b) => `<option value="${b}">${b} GHz</option>`)
			.join("");
		const widthOptions = [20, 40, 80]
			.map((w) => `<option value="${w}">${w} MHz</option>`)
			.join("");
		const channelOptions = [...channelChoices(2.4), ...channelChoices(5)]
			.map((c) => `<option value="${c}">${c}</option>`)
			.join("");
		this.root.innerHTML = `
		<h1>Capture configurations</h1>
		<p id="banner" class="error" hidden></p>
		<table id="config-table">
			<thead><tr>
				<th>name</th><th>band</th><th>bandwidth</th><th>channel</th>
				<th>devices</th><th>status</th><th>actions</th>
			</tr></thead>
			<tbody id="config-rows"></tbody>
		</table>
		<p id="empty-note" hidden>No configurations yet.</p>
		<button id="new-config" type="button">New configuration</button>
		<form id="config-form" hidden>
			<h2 id="form-title"></h2>
			<label>Name <input name="name" autocomplete="off"></label>
			<small class="field-error" data-for="name" hidden></small>
			<label>Description <input name="description" autocomplete="off"></label>
			<label>Band <select name="band">${bandOptions}</select></label>
			<small class="field-error" data-for="band" hidden></small>
			<label>Bandwidth <select name="bandwidth">${widthOptions}</select></label>
			<small class="field-error" data-for="bandwidth" hidden></small>
			<label>Channel <select name="channel">${channelOptions}</select></label>
			<small class="field-error" data-for="channel" hidden></small>
			<fieldset>
				<legend>Device filter (empty = all devices)</legend>
				<div id="mac-rows"></div>
				<button id="add-mac" type="button">Add MAC</button>
			</fieldset>
			<small class="field-error" data-for="device_filter" hidden></small>
			<p id="form-error" class="error" hidden></p>
			<button id="form-submit" type="submit">Save</button>
			<button id="form-cancel" type="button">Cancel</button>
		</form>`;

		this.el("new-config").addEventListener("click", () => this.openForm(null));
		this.el("form-cancel").addEventListener("click", () => this.closeForm());
		this.el("add-mac").addEventListener("click", () => this.addMacRow(""));
		const form = this.el<HTMLFormElement>("config-form");
		form.addEventListener("submit", (event) => {
			event.preventDefault();
			this.submitForm();
		});
		form.addEventListener("change", (event) => {
			const field = (event.target as HTMLElement).getAttribute("name");
			if (field) this.touched.add(field);
			this.showFieldErrors();
		});
	}

	// -- configuration list ------------------------------------------------

	private renderList(): void {
		const rows = this.el("config-rows");
		this.el("empty-note").hidden = this.configs.length > 0;
		rows.innerHTML = this.configs.map((config) => this.rowHtml(config)).join("");
		for (const row of rows.querySelectorAll("tr")) {
			const name = row.dataset.name;
			if (!name) continue;
			this.wireRow(row, name);
		}
	}

	private rowHtml(config: CaptureConfig): string {
		const running = config.status === "running";
		const busy = this.pending.has(config.name);
		const devices = config.device_filter.length
			? config.device_filter.map(esc).join("<br>")
			: "all devices";
		const guard = running ? `disabled title="${RUNNING_TOOLTIP}"` : busy ? "disabled" : "";
		const error = this.rowErrors.get(config.name);
		return `
		<tr data-name="${esc(config.name)}">
			<td>${esc(config.name)}</td>
			<td>${config.band} GHz</td>
			<td>${config.bandwidth} MHz</td>
			<td>${config.channel}</td>
			<td>${devices}</td>
			<td><span class="status ${config.status}">${config.status}</span></td>
			<td>
				<button class="act-start" ${running || busy ? "disabled" : ""}>Start</button>
				<button class="act-stop" ${!running || busy ? "disabled" : ""}>Stop</button>
				<button class="act-download" ${busy ? "disabled" : ""}>Download</button>
				<button class="act-edit" ${guard}>Edit</button>
				<button class="act-delete" ${guard}>Delete</button>
				${error ? `<small class="row-error">${esc(error)}</small>` : ""}
			</td>
		</tr>`;
	}

	private wireRow(row: HTMLElement, name: string): void {
		const on = (cls: string, handler: () => void) => {
			row.querySelector(`.${cls}`)?.addEventListener("click", handler);
		};
		on("act-start", () => this.rowAction(name, () => this.api.start(name)));
		on("act-stop", () => this.rowAction(name, () => this.api.stop(name)));
		on("act-download", () => this.rowAction(name, async () => {
			const blob = await this.api.output(name);
			this.saveFile(`${name}.csv`, blob);
		}));
		on("act-edit", () => {
			const config = this.configs.find((c) => c.name === name);
			if (config && config.status !== "running") this.openForm(config);
		});
		on("act-delete", () => {
			const config = this.configs.find((c) => c.name === name);
			if (!config || config.status === "running") return;
			if (!window.confirm(`Delete configuration "${name}"?`)) return;
			this.rowAction(name, () => this.api.remove(name));
		});
	}

	private enqueue(name: string, action: () => Promise<void>): void {
		const prev = this.chains.get(name) ?? Promise.resolve();
		this.chains.set(name, prev.then(action, action));
	}

	private rowAction(name: string, action: () => Promise<unknown>): void {
		this.pending.add(name);
		this.rowErrors.delete(name);
		this.renderList();
		this.enqueue(name, async () => {
			try {
				await action();
			} catch (err) {
				this.rowErrors.set(name, errorText(err));
			} finally {
				this.pending.delete(name);
				await this.refresh();
			}
		});
	}

	// -- create / edit form -------------------------------------------------

	private field<T extends HTMLInputElement | HTMLSelectElement>(name: string): T {
		const form = this.el<HTMLFormElement>("config-form");
		return form.elements.namedItem(name) as T;
	}

	private openForm(config: CaptureConfig | null): void {
		this.editing = config ? config.name : null;
		this.touched.clear();
		this.el("form-title").textContent = config
			? `Edit ${config.name}`
			: "New configuration";
		this.field<HTMLInputElement>("name").value = config ? config.name : "";
		// renames are not supported; the document's name must match the URL
		this.field<HTMLInputElement>("name").disabled = config !== null;
		this.field<HTMLInputElement>("description").value = config ? config.description : "";
		this.field<HTMLSelectElement>("band").value = String(config ? config.band : 2.4);
		this.field<HTMLSelectElement>("bandwidth").value = String(config ? config.bandwidth : 20);
		this.field<HTMLSelectElement>("channel").value = String(config ? config.channel : 1);
		this.el("mac-rows").innerHTML = "";
		for (const mac of config ? config.device_filter : []) this.addMacRow(mac);
		this.formError(null);
		this.showFieldErrors();
		this.el("config-form").hidden = false;
	}

	private closeForm(): void {
		this.editing = null;
		this.el("config-form").hidden = true;
	}

	private addMacRow(value: string): void {
		const rows = this.el("mac-rows");
		const row = document.createElement("div");
		row.className = "mac-row";
		row.innerHTML = `
			<input class="mac-input" name="device_filter" placeholder="aa:bb:cc:dd:ee:ff"
				autocomplete="off" value="${esc(value)}">
			<button class="remove-mac" type="button">Remove</button>`;
		row.querySelector(".remove-mac")?.addEventListener("click", () => {
			row.remove();
			this.touched.add("device_filter");
			this.showFieldErrors();
		});
		rows.appendChild(row);
	}

	private readForm(): ConfigInput {
		const macs = [...this.el("mac-rows").querySelectorAll<HTMLInputElement>(".mac-input")]
			.map((input) => input.value.trim().toLowerCase())
			.filter((mac) => mac.length > 0);
		return {
			name: this.field<HTMLInputElement>("name").value.trim(),
			description: this.field<HTMLInputElement>("description").value,
			band: Number(this.field<HTMLSelectElement>("band").value),
			bandwidth: Number(this.field<HTMLSelectElement>("bandwidth").value),
			channel: Number(this.field<HTMLSelectElement>("channel").value),
			device_filter: macs,
		};
	}

	private showFieldErrors(): boolean {
		const errors = validateConfig(this.readForm());
		for (const note of this.el("config-form").querySelectorAll<HTMLElement>(".field-error")) {
			const field = note.dataset.for ?? "";
			const message = (errors as Record<string, string | undefined>)[field];
			if (message && this.touched.has(field)) {
				note.textContent = message;
				note.hidden = false;
			} else {
				note.hidden = true;
			}
		}
		return Object.keys(errors).length === 0;
	}

	private formError(message: string | null): void {
		const note = this.el("form-error");
		note.textContent = message ?? "";
		note.hidden = message === null;
	}

	private submitForm(): void {
		for (const field of ["name", "band", "bandwidth", "channel", "device_filter"]) {
			this.touched.add(field);
		}
		if (!this.showFieldErrors()) return;
		const input = this.readForm();
		const target = this.editing;
		this.formError(null);
		this.enqueue(target ?? input.name, async () => {
			try {
				if (target !== null) await this.api.replace(target, input);
				else await this.api.create(input);
				this.closeForm();
			} catch (err) {
				this.formError(errorText(err));
			} finally {
				await this.refresh();
			}
		});
	}
}
