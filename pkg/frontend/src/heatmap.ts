// Field renderer: G x G heatmap when the model knows its grid, otherwise
// a single-row strip. One field value becomes one source pixel; the
// canvas scales that up with smoothing off, so no values are invented.

import { paintField } from "./colorscale.js";

export class FieldView {
  private readonly ctx: CanvasRenderingContext2D;
  private readonly source: HTMLCanvasElement;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2D canvas context unavailable");
    this.ctx = ctx;
    this.source = document.createElement("canvas");
  }

  render(field: ArrayLike<number>, gridSide: number | null, limit: number): void {
    const w = gridSide ?? field.length;
    const h = gridSide ? gridSide : 1;
    if (w * h !== field.length) {
      throw new Error(`field has ${field.length} cells, expected ${w}x${h}`);
    }
    const img = new ImageData(paintField(field, limit), w, h);
    this.source.width = w;
    this.source.height = h;
    const sctx = this.source.getContext("2d");
    if (!sctx) throw new Error("2D canvas context unavailable");
    sctx.putImageData(img, 0, 0);

    this.ctx.imageSmoothingEnabled = false;
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    this.ctx.drawImage(this.source, 0, 0, this.canvas.width, this.canvas.height);
  }
}
