/**
 * Dependency-free SVG generators for the two charts in the design card:
 * the sensitivity curve (zero baseline rule, support markers) and the
 * design-weight bars.  Pure string builders so tests can assert markup.
 */

export interface CurveData {
  grid: number[];
  values: (number | null)[];
  support: number[];
}

const W = 560;
const H = 240;
const PAD = 36;

function scale(domainLo: number, domainHi: number, rangeLo: number, rangeHi: number) {
  const span = domainHi - domainLo || 1;
  return (v: number) => rangeLo + ((v - domainLo) / span) * (rangeHi - rangeLo);
}

export function sensitivitySvg(data: CurveData): string {
  const pts = data.grid
    .map((x, i) => [x, data.values[i]] as const)
    .filter((p): p is readonly [number, number] => p[1] !== null && Number.isFinite(p[1]!));
  if (pts.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}"><text x="10" y="20">no finite sensitivity values</text></svg>`;
  }
  const xs = pts.map((p) => p[0]);
  const ys = pts.map((p) => p[1]);
  const yLo = Math.min(...ys, 0);
  const yHi = Math.max(...ys, 0);
  const sx = scale(Math.min(...xs), Math.max(...xs), PAD, W - 8);
  const sy = scale(yLo, yHi === yLo ? yLo + 1 : yHi, H - PAD, 10);
  const path = pts
    .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p[0]).toFixed(2)},${sy(p[1]).toFixed(2)}`)
    .join(" ");
  const zeroY = sy(0).toFixed(2);
  const markers = data.support
    .map((x) => {
      let nearest = 0;
      let best = Infinity;
      pts.forEach((p, i) => {
        const d = Math.abs(p[0] - x);
        if (d < best) {
          best = d;
          nearest = i;
        }
      });
      const [px, py] = pts[nearest];
      return `<circle class="support-marker" cx="${sx(px).toFixed(2)}" cy="${sy(py).toFixed(2)}" r="4" fill="white" stroke="#1f6fb4" stroke-width="1.5"/>`;
    })
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" role="img" aria-label="sensitivity curve">` +
    `<line class="zero-baseline" x1="${PAD}" y1="${zeroY}" x2="${W - 8}" y2="${zeroY}" stroke="red" stroke-width="1.5"/>` +
    `<path d="${path}" fill="none" stroke="#1f6fb4" stroke-width="1.5"/>` +
    markers +
    `<text x="${PAD}" y="${H - 6}" font-size="10">dose (transformed)</text>` +
    `</svg>`
  );
}

export function weightsBarSvg(weights: number[], labels: string[]): string {
  const n = weights.length;
  if (n === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="60"></svg>`;
  }
  const h = 120;
  const barW = Math.min(64, (W - 2 * PAD) / n - 8);
  const maxW = Math.max(...weights, 1e-9);
  const bars = weights
    .map((w, i) => {
      const x = PAD + i * ((W - 2 * PAD) / n);
      const bh = (w / maxW) * (h - 40);
      return (
        `<rect class="weight-bar" x="${x.toFixed(1)}" y="${(h - 24 - bh).toFixed(1)}" width="${barW.toFixed(1)}" height="${bh.toFixed(1)}" fill="#6aa84f"/>` +
        `<text x="${(x + barW / 2).toFixed(1)}" y="${h - 10}" font-size="9" text-anchor="middle">${labels[i] ?? ""}</text>`
      );
    })
    .join("");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${h}" role="img" aria-label="design weights">${bars}</svg>`;
}
