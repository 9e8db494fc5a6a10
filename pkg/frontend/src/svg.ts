/**
 * Deterministic SVG scene builder: fixed style, fixed number formatting, no
 * timestamps or generated ids, so repeated renders are byte-identical.
 */

export interface Scale {
  (v: number): number;
  ticks(): number[];
}

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 64, right: 24, top: 40, bottom: 48 };

export const PALETTE = ["#1f6fb2", "#c94f30", "#3c8a4e", "#7a4fa3", "#8a6d1f",
  "#2b8a8a"];

function fmt(v: number): string {
  if (!Number.isFinite(v)) {
    throw new Error(`cannot place non-finite coordinate ${v}`);
  }
  return v.toFixed(2);
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

function niceTicks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const raw = span / n;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= n) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) out.push(v);
  return out;
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  const f = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  f.ticks = () => niceTicks(lo, hi);
  return f;
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  if (lo <= 0 || hi <= 0) {
    throw new Error("log scale needs positive bounds");
  }
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  const f = ((v: number) =>
    outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo)) as Scale;
  f.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(llo - 1e-9); e <= Math.floor(lhi + 1e-9); e++) {
      out.push(10 ** e);
    }
    return out.length >= 2 ? out : [lo, hi];
  };
  return f;
}

export interface Frame {
  x: Scale;
  y: Scale;
  body: string[];
}

export class Figure {
  private parts: string[] = [];

  constructor(readonly title: string) {}

  frame(xlo: number, xhi: number, ylo: number, yhi: number,
        opts: { xlog?: boolean; ylog?: boolean; xlabel: string; ylabel: string }): Frame {
    const mk = (log: boolean | undefined, lo: number, hi: number, a: number, b: number) =>
      log ? logScale(lo, hi, a, b) : linearScale(lo, hi, a, b);
    const x = mk(opts.xlog, xlo, xhi, MARGIN.left, WIDTH - MARGIN.right);
    const y = mk(opts.ylog, ylo, yhi, HEIGHT - MARGIN.bottom, MARGIN.top);
    const body: string[] = [];
    for (const t of x.ticks()) {
      const px = fmt(x(t));
      body.push(`<line x1="${px}" y1="${fmt(y(ylo))}" x2="${px}" y2="${fmt(y(yhi))}" stroke="#dddddd" stroke-width="1"/>`);
      body.push(`<text x="${px}" y="${fmt(HEIGHT - MARGIN.bottom + 18)}" font-size="11" text-anchor="middle" fill="#333333">${fmtTick(t)}</text>`);
    }
    for (const t of y.ticks()) {
      const py = fmt(y(t));
      body.push(`<line x1="${fmt(x(xlo))}" y1="${py}" x2="${fmt(x(xhi))}" y2="${py}" stroke="#dddddd" stroke-width="1"/>`);
      body.push(`<text x="${fmt(MARGIN.left - 8)}" y="${py}" font-size="11" text-anchor="end" dominant-baseline="middle" fill="#333333">${fmtTick(t)}</text>`);
    }
    body.push(`<rect x="${fmt(MARGIN.left)}" y="${fmt(MARGIN.top)}" width="${fmt(WIDTH - MARGIN.left - MARGIN.right)}" height="${fmt(HEIGHT - MARGIN.top - MARGIN.bottom)}" fill="none" stroke="#333333" stroke-width="1"/>`);
    body.push(`<text x="${fmt((MARGIN.left + WIDTH - MARGIN.right) / 2)}" y="${fmt(HEIGHT - 10)}" font-size="12" text-anchor="middle" fill="#111111">${opts.xlabel}</text>`);
    body.push(`<text x="16" y="${fmt((MARGIN.top + HEIGHT - MARGIN.bottom) / 2)}" font-size="12" text-anchor="middle" fill="#111111" transform="rotate(-90 16 ${fmt((MARGIN.top + HEIGHT - MARGIN.bottom) / 2)})">${opts.ylabel}</text>`);
    this.parts.push(...body);
    return { x, y, body: this.parts };
  }

  polyline(frame: Frame, xs: number[], ys: number[], color: string,
           opts: { width?: number; dash?: string } = {}): void {
    const pts = xs.map((v, i) => `${fmt(frame.x(v))},${fmt(frame.y(ys[i]))}`).join(" ");
    const dash = opts.dash ? ` stroke-dasharray="${opts.dash}"` : "";
    this.parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="${opts.width ?? 1.6}"${dash}/>`);
  }

  points(frame: Frame, xs: number[], ys: number[], color: string, r = 3): void {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(`<circle cx="${fmt(frame.x(xs[i]))}" cy="${fmt(frame.y(ys[i]))}" r="${r}" fill="${color}"/>`);
    }
  }

  label(x: number, y: number, text: string, color = "#111111", size = 12): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" fill="${color}">${escapeXml(text)}</text>`);
  }

  legend(entries: Array<[string, string]>): void {
    entries.forEach(([text, color], i) => {
      const y = MARGIN.top + 16 + 16 * i;
      const x = WIDTH - MARGIN.right - 200;
      this.parts.push(`<line x1="${fmt(x)}" y1="${fmt(y - 4)}" x2="${fmt(x + 22)}" y2="${fmt(y - 4)}" stroke="${color}" stroke-width="2"/>`);
      this.parts.push(`<text x="${fmt(x + 28)}" y="${fmt(y)}" font-size="11" fill="#111111">${escapeXml(text)}</text>`);
    });
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`,
      `<text x="${fmt(WIDTH / 2)}" y="24" font-size="15" text-anchor="middle" fill="#111111">${escapeXml(this.title)}</text>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
