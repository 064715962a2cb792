import { describe, expect, it } from "vitest";

import { axisAngle, polygonPoints, renderRadar, valueToRadius } from "../src/radar.js";

describe("radar geometry", () => {
  it("first axis points straight up and axes divide the circle evenly", () => {
    expect(axisAngle(0, 5)).toBeCloseTo(-Math.PI / 2, 12);
    const step = axisAngle(1, 5) - axisAngle(0, 5);
    for (let i = 1; i < 5; i++) {
      expect(axisAngle(i, 5) - axisAngle(i - 1, 5)).toBeCloseTo(step, 12);
    }
  });

  it("maps the score range onto the radius with clamping", () => {
    expect(valueToRadius(-4, -4, 4, 100)).toBe(0);
    expect(valueToRadius(4, -4, 4, 100)).toBe(100);
    expect(valueToRadius(0, -4, 4, 100)).toBe(50);
    expect(valueToRadius(99, -4, 4, 100)).toBe(100);
    expect(valueToRadius(-99, -4, 4, 100)).toBe(0);
  });

  it("polygon has one vertex per trait", () => {
    const points = polygonPoints(
      [{ label: "O", value: 0 }, { label: "C", value: 1 },
       { label: "E", value: 2 }, { label: "A", value: -1 },
       { label: "N", value: -2 }], -4, 4, 100);
    expect(points).toHaveLength(5);
    // zero score sits mid-radius on the vertical axis
    const first = points[0]!;
    expect(first[0]).toBeCloseTo(0, 9);
    expect(first[1]).toBeCloseTo(-50, 9);
  });
});

describe("radar rendering", () => {
  it("produces an svg with five labelled axes and a shape", () => {
    const svg = renderRadar([
      { label: "O", value: 1 }, { label: "C", value: 0 },
      { label: "E", value: 2 }, { label: "A", value: -2 },
      { label: "N", value: 0.5 }]);
    expect(svg.tagName.toLowerCase()).toBe("svg");
    expect(svg.querySelectorAll("line.radar-axis")).toHaveLength(5);
    expect(svg.querySelectorAll("text.radar-label")).toHaveLength(5);
    expect(svg.querySelectorAll("polygon.radar-shape")).toHaveLength(1);
    const labels = Array.from(svg.querySelectorAll("text.radar-label"),
                              (n) => n.textContent);
    expect(labels).toEqual(["O", "C", "E", "A", "N"]);
  });
});
