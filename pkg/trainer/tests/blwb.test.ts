import { describe, expect, it } from "vitest";

import { readBundle, writeBundle } from "../src/blwb.js";

describe("weight bundle codec", () => {
  it("round-trips tensors bit-exactly", () => {
    const tensors = [
      { name: "a.weight", dims: [2, 3], data: Float32Array.from([1, 2.5, -3, 0, 1e-7, 4096]) },
      { name: "b.bias", dims: [4], data: Float32Array.from([0.1, 0.2, 0.3, 0.4]) },
    ];
    const back = readBundle(writeBundle(tensors));
    expect(back.length).toBe(2);
    expect(back[0].name).toBe("a.weight");
    expect(back[0].dims).toEqual([2, 3]);
    expect([...back[0].data]).toEqual([...tensors[0].data]);
    expect([...back[1].data]).toEqual([...tensors[1].data]);
  });

  it("produces the pinned byte layout", () => {
    const data = writeBundle([{ name: "ab", dims: [2], data: Float32Array.from([1, 2]) }]);
    expect(data.toString("ascii", 0, 4)).toBe("BLWB");
    expect(data.readUInt32LE(4)).toBe(1); // version
    expect(data.readUInt32LE(8)).toBe(1); // tensor count
    expect(data.readUInt16LE(12)).toBe(2); // name length
    expect(data.toString("utf8", 14, 16)).toBe("ab");
    expect(data.readUInt8(16)).toBe(1); // rank
    expect(data.readUInt32LE(17)).toBe(2); // dim
    expect(data.readFloatLE(21)).toBe(1);
    expect(data.readFloatLE(25)).toBe(2);
    expect(data.length).toBe(29);
  });

  it("rejects bad magic and truncation", () => {
    expect(() => readBundle(Buffer.from("XXXX\0\0\0\0\0\0\0\0"))).toThrow(/magic/);
    const good = writeBundle([{ name: "w", dims: [4], data: new Float32Array(4) }]);
    expect(() => readBundle(good.subarray(0, good.length - 3))).toThrow(/truncated/);
  });

  it("rejects duplicate names", () => {
    const t = { name: "w", dims: [1], data: Float32Array.from([1]) };
    expect(() => writeBundle([t, t])).toThrow(/duplicate/);
  });
});
