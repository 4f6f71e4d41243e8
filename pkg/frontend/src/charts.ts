// Minimal SVG line charts.  The only arithmetic allowed here is axis
// scaling: data values pass through untouched from the API payloads.

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartSeries {
  label: string;
  points: [number, number][]; // (x position in arbitrary units, value)
  cssClass: string;
}

export function renderLineChart(
  doc: Document,
  container: Element,
  series: ChartSeries[],
  width = 640,
  height = 160,
): void {
  container.textContent = "";
  const values = series.flatMap((s) => s.points.map(([, v]) => v));
  const xs = series.flatMap((s) => s.points.map(([x]) => x));
  if (values.length === 0) {
    const empty = doc.createElement("p");
    empty.className = "chart-empty";
    empty.textContent = "no data";
    container.append(empty);
    return;
  }
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(0, ...values);
  const yMax = Math.max(...values);
  const xSpan = xMax - xMin || 1;
  const ySpan = yMax - yMin || 1;

  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart");
  for (const one of series) {
    const polyline = doc.createElementNS(SVG_NS, "polyline");
    const coords = one.points
      .map(([x, v]) => {
        const px = ((x - xMin) / xSpan) * width;
        const py = height - ((v - yMin) / ySpan) * height;
        return `${px.toFixed(2)},${py.toFixed(2)}`;
      })
      .join(" ");
    polyline.setAttribute("points", coords);
    polyline.setAttribute("fill", "none");
    polyline.setAttribute("class", one.cssClass);
    polyline.setAttribute("data-label", one.label);
    polyline.setAttribute("data-count", String(one.points.length));
    svg.append(polyline);
  }
  const legend = doc.createElement("p");
  legend.className = "chart-legend";
  legend.textContent = series.map((s) => s.label).join(" / ");
  container.append(svg, legend);
}
