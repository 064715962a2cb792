/** Five-axis SVG radar chart for the derived trait scores. */

export interface RadarPoint {
  label: string;
  value: number;
}

export interface RadarOptions {
  size?: number;
  min?: number;
  max?: number;
  rings?: number;
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function axisAngle(index: number, count: number): number {
  return -Math.PI / 2 + (2 * Math.PI * index) / count;
}

export function valueToRadius(value: number, min: number, max: number,
                              radius: number): number {
  const clamped = Math.min(max, Math.max(min, value));
  return ((clamped - min) / (max - min)) * radius;
}

export function polygonPoints(points: RadarPoint[], min: number, max: number,
                              radius: number): [number, number][] {
  return points.map((p, i) => {
    const angle = axisAngle(i, points.length);
    const r = valueToRadius(p.value, min, max, radius);
    return [r * Math.cos(angle), r * Math.sin(angle)];
  });
}

export function renderRadar(points: RadarPoint[],
                            options: RadarOptions = {}): SVGSVGElement {
  const size = options.size ?? 280;
  const min = options.min ?? -4;
  const max = options.max ?? 4;
  const rings = options.rings ?? 4;
  const radius = size / 2 - 34;
  const center = size / 2;

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
  svg.setAttribute("class", "radar");
  svg.setAttribute("role", "img");

  const g = document.createElementNS(SVG_NS, "g");
  g.setAttribute("transform", `translate(${center},${center})`);
  svg.appendChild(g);

  for (let ring = 1; ring <= rings; ring++) {
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("r", String((radius * ring) / rings));
    circle.setAttribute("class", "radar-ring");
    g.appendChild(circle);
  }

  points.forEach((p, i) => {
    const angle = axisAngle(i, points.length);
    const x = radius * Math.cos(angle);
    const y = radius * Math.sin(angle);
    const axis = document.createElementNS(SVG_NS, "line");
    axis.setAttribute("x2", String(x));
    axis.setAttribute("y2", String(y));
    axis.setAttribute("class", "radar-axis");
    g.appendChild(axis);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(1.14 * x));
    label.setAttribute("y", String(1.14 * y + 4));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "radar-label");
    label.textContent = p.label;
    g.appendChild(label);
  });

  const polygon = document.createElementNS(SVG_NS, "polygon");
  polygon.setAttribute(
    "points",
    polygonPoints(points, min, max, radius)
      .map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`)
      .join(" "));
  polygon.setAttribute("class", "radar-shape");
  g.appendChild(polygon);

  return svg;
}
