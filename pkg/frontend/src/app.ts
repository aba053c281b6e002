// Wiring between the DOM and the service: sliders in, fields out.

import { ApiClient, ApiError } from "./api.js";
import { TimeAnimator } from "./animator.js";
import { FieldView } from "./heatmap.js";
import { LatestWins } from "./scheduler.js";
import { ExplorerState, sameQuery, sliderRange, symmetricLimit } from "./state.js";
import type { FieldResult, InferQuery, Meta } from "./types.js";

const SLIDER_STEPS = 400;
const ANIM_FPS = 10;
const ANIM_FRAMES = 50;
const ANIM_WINDOW = 10;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

interface SliderBinding {
  input: HTMLInputElement;
  readout: HTMLSpanElement;
  lo: number; // slider travel
  hi: number;
  value(): number;
  set(v: number): void;
}

export class App {
  private readonly api: ApiClient;
  private meta!: Meta;
  private state!: ExplorerState;
  private view!: FieldView;
  private scheduler!: LatestWins<InferQuery, FieldResult>;
  private animator: TimeAnimator<FieldResult> | null = null;
  private tSlider!: SliderBinding;
  private paramSliders: SliderBinding[] = [];
  private readonly modeCache = new Map<number, Float64Array>();

  constructor(baseUrl = "") {
    this.api = new ApiClient(baseUrl);
  }

  async connect(): Promise<void> {
    const banner = el<HTMLDivElement>("banner");
    try {
      this.meta = await this.api.meta();
    } catch (err) {
      banner.hidden = false;
      el<HTMLSpanElement>("banner-text").textContent =
        `cannot reach the surrogate service: ${err instanceof Error ? err.message : err}`;
      el<HTMLButtonElement>("banner-retry").onclick = () => {
        banner.hidden = true;
        void this.connect();
      };
      return;
    }
    banner.hidden = true;

    this.state = new ExplorerState(this.meta);
    this.view = new FieldView(el<HTMLCanvasElement>("field-canvas"));
    this.sizeCanvas();
    this.buildControls();
    this.scheduler = new LatestWins<InferQuery, FieldResult>(
      (q) => this.api.infer(q),
      (q, r) => this.onResult(q, r),
      (_q, err) => this.onError(err),
      sameQuery,
    );

    el<HTMLSpanElement>("facts").textContent =
      `${this.meta.n} cells · rank ${this.meta.r} · ` +
      `certified e = ${this.meta.e.toExponential(2)}`;

    // mode-1 preview fills the canvas until the first inference lands
    await this.showMode(1);
    this.requestField();
  }

  // ----- layout -------------------------------------------------------

  private sizeCanvas(): void {
    const canvas = el<HTMLCanvasElement>("field-canvas");
    if (this.meta.grid_side) {
      canvas.width = 480;
      canvas.height = 480;
    } else {
      canvas.width = 640;
      canvas.height = 64;
      el<HTMLSpanElement>("grid-note").textContent =
        "no grid geometry in model metadata: showing the raw field vector as a strip";
    }
  }

  private buildControls(): void {
    const holder = el<HTMLDivElement>("sliders");
    holder.innerHTML = "";
    this.tSlider = this.addSlider(holder, "t", this.meta.t_range, (v) => {
      this.stopPlayback();
      this.state.t = v;
      this.requestField();
    });
    this.paramSliders = this.meta.param_ranges.map((range, i) =>
      this.addSlider(holder, this.meta.parameter_names[i] ?? `p${i + 1}`, range, (v) => {
        this.stopPlayback();
        this.state.lambda[i] = v;
        this.requestField();
      }),
    );
    this.tSlider.set(this.state.t);
    this.paramSliders.forEach((s, i) => s.set(this.state.lambda[i]));

    const viewSelect = el<HTMLSelectElement>("view-select");
    viewSelect.innerHTML = "";
    const fieldOpt = document.createElement("option");
    fieldOpt.value = "field";
    fieldOpt.textContent = "reconstructed field";
    viewSelect.appendChild(fieldOpt);
    for (let k = 1; k <= this.meta.r; k++) {
      const opt = document.createElement("option");
      opt.value = String(k);
      opt.textContent = `basis mode ${k}`;
      viewSelect.appendChild(opt);
    }
    viewSelect.onchange = () => {
      this.stopPlayback();
      if (viewSelect.value === "field") {
        this.state.view = { kind: "field" };
        this.paint();
      } else {
        void this.showMode(Number(viewSelect.value));
      }
    };

    el<HTMLButtonElement>("play").onclick = () => this.togglePlayback();
    const pin = el<HTMLButtonElement>("pin-scale");
    pin.onclick = () => {
      this.state.scale.pinned = !this.state.scale.pinned;
      pin.textContent = this.state.scale.pinned ? "unpin color scale" : "pin color scale";
      this.updateScaleLabel();
    };
  }

  private addSlider(
    holder: HTMLDivElement,
    label: string,
    trained: [number, number],
    onInput: (v: number) => void,
  ): SliderBinding {
    const [lo, hi] = sliderRange(trained[0], trained[1]);
    const row = document.createElement("div");
    row.className = "slider-row";

    const name = document.createElement("label");
    name.textContent = label;
    const readout = document.createElement("span");
    readout.className = "readout";

    const zone = document.createElement("div");
    zone.className = "zone";
    const safe = document.createElement("div");
    safe.className = "zone-safe";
    // the middle band is the training range; the rest is extrapolation
    safe.style.left = `${((trained[0] - lo) / (hi - lo)) * 100}%`;
    safe.style.width = `${((trained[1] - trained[0]) / (hi - lo)) * 100}%`;
    zone.appendChild(safe);

    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = String(SLIDER_STEPS);
    input.step = "1";
    const toValue = (raw: number) => lo + ((hi - lo) * raw) / SLIDER_STEPS;
    const fromValue = (v: number) =>
      Math.round(((v - lo) / (hi - lo)) * SLIDER_STEPS);
    input.oninput = () => {
      const v = toValue(Number(input.value));
      readout.textContent = v.toFixed(3);
      onInput(v);
    };
    zone.appendChild(input);

    row.appendChild(name);
    row.appendChild(zone);
    row.appendChild(readout);
    holder.appendChild(row);

    return {
      input,
      readout,
      lo,
      hi,
      value: () => toValue(Number(input.value)),
      set: (v: number) => {
        input.value = String(fromValue(v));
        readout.textContent = v.toFixed(3);
      },
    };
  }

  // ----- inference path ----------------------------------------------

  private requestField(): void {
    if (this.state.view.kind !== "field") {
      // leaving mode view: restore the last field and chip right away, in
      // case the pending query dedups against the last delivered one
      this.state.view = { kind: "field" };
      el<HTMLSelectElement>("view-select").value = "field";
      el<HTMLSpanElement>("chip").hidden = !this.state.extrapolated;
      this.paint();
    }
    this.scheduler.submit(this.state.query());
  }

  private onResult(query: InferQuery, result: FieldResult): void {
    this.state.applyResult(query, result);
    el<HTMLSpanElement>("message").textContent = "";
    el<HTMLSpanElement>("latency").textContent =
      `${(result.latencyUs / 1000).toFixed(2)} ms`;
    el<HTMLSpanElement>("chip").hidden = !result.extrapolated;
    if (this.state.view.kind === "field") this.paint();
  }

  private onError(err: unknown): void {
    if (err instanceof ApiError && err.status === 422) {
      el<HTMLSpanElement>("message").textContent = err.message;
      return; // controls keep their values; nothing is rendered
    }
    el<HTMLSpanElement>("message").textContent =
      err instanceof Error ? err.message : String(err);
  }

  private paint(): void {
    if (!this.state.field) return;
    this.view.render(
      this.state.field,
      this.meta.grid_side ?? null,
      this.state.scale.limit,
    );
    this.updateScaleLabel();
  }

  private updateScaleLabel(): void {
    const tag = this.state.scale.pinned ? "pinned" : "auto";
    el<HTMLSpanElement>("scale-label").textContent =
      `color scale ±${this.state.scale.limit.toPrecision(3)} (${tag})`;
  }

  private async showMode(k: number): Promise<void> {
    this.state.view = { kind: "mode", k };
    let column = this.modeCache.get(k);
    if (!column) {
      try {
        column = await this.api.mode(k);
      } catch (err) {
        this.onError(err);
        return;
      }
      this.modeCache.set(k, column);
    }
    if (this.state.view.kind !== "mode" || this.state.view.k !== k) return;
    el<HTMLSpanElement>("chip").hidden = true; // modes are data, not predictions
    this.view.render(column, this.meta.grid_side ?? null, symmetricLimit(column));
  }

  // ----- time animation ----------------------------------------------

  private togglePlayback(): void {
    if (this.animator?.playing) {
      this.stopPlayback();
      return;
    }
    this.state.view = { kind: "field" };
    el<HTMLSelectElement>("view-select").value = "field";
    const lambda = [...this.state.lambda];
    this.animator = new TimeAnimator<FieldResult>({
      tRange: this.meta.t_range,
      fps: ANIM_FPS,
      frames: ANIM_FRAMES,
      window: ANIM_WINDOW,
      fetchWindow: (ts) => this.api.inferBatch(ts.map((t) => ({ t, lambda }))),
      present: (t, result) => {
        this.state.applyResult({ t, lambda }, result);
        this.tSlider.set(t);
        el<HTMLSpanElement>("chip").hidden = !result.extrapolated;
        this.paint();
      },
    });
    this.animator.play();
    this.state.playing = true;
    el<HTMLButtonElement>("play").textContent = "pause";
  }

  private stopPlayback(): void {
    if (!this.animator) return;
    this.animator.pause();
    // the scrubber stays where the last rendered frame left it
    this.state.t = this.animator.currentT;
    this.tSlider.set(this.state.t);
    this.animator = null;
    this.state.playing = false;
    el<HTMLButtonElement>("play").textContent = "play";
  }
}
