/**
 * Weight-bundle file codec. Byte layout (little-endian):
 *   "BLWB" | version u32 = 1 | count u32 |
 *   per tensor: name_len u16 | name utf8 | rank u8 | dims u32[rank] | f32 payload
 */

export interface NamedTensor {
  name: string;
  dims: number[];
  data: Float32Array;
}

const MAGIC = "BLWB";

export function writeBundle(tensors: NamedTensor[]): Buffer {
  const parts: Buffer[] = [];
  const header = Buffer.alloc(12);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(1, 4);
  header.writeUInt32LE(tensors.length, 8);
  parts.push(header);
  const seen = new Set<string>();
  for (const t of tensors) {
    if (seen.has(t.name)) throw new Error(`duplicate tensor name ${t.name}`);
    seen.add(t.name);
    const nameBytes = Buffer.from(t.name, "utf8");
    const meta = Buffer.alloc(2 + nameBytes.length + 1 + 4 * t.dims.length);
    meta.writeUInt16LE(nameBytes.length, 0);
    nameBytes.copy(meta, 2);
    meta.writeUInt8(t.dims.length, 2 + nameBytes.length);
    t.dims.forEach((d, i) => meta.writeUInt32LE(d, 2 + nameBytes.length + 1 + 4 * i));
    const n = t.dims.reduce((a, b) => a * b, 1);
    if (n !== t.data.length) throw new Error(`${t.name}: dims ${t.dims} != data ${t.data.length}`);
    const payload = Buffer.alloc(4 * n);
    for (let i = 0; i < n; i++) payload.writeFloatLE(t.data[i], 4 * i);
    parts.push(meta, payload);
  }
  return Buffer.concat(parts);
}

export function readBundle(data: Buffer): NamedTensor[] {
  if (data.length < 12) throw new Error("file too short");
  if (data.toString("ascii", 0, 4) !== MAGIC) throw new Error(`bad magic ${data.toString("ascii", 0, 4)}`);
  const version = data.readUInt32LE(4);
  if (version !== 1) throw new Error(`unsupported version ${version}`);
  const count = data.readUInt32LE(8);
  let pos = 12;
  const tensors: NamedTensor[] = [];
  const seen = new Set<string>();
  for (let i = 0; i < count; i++) {
    const nameLen = data.readUInt16LE(pos);
    pos += 2;
    const name = data.toString("utf8", pos, pos + nameLen);
    pos += nameLen;
    const rank = data.readUInt8(pos);
    pos += 1;
    const dims: number[] = [];
    for (let r = 0; r < rank; r++) {
      dims.push(data.readUInt32LE(pos));
      pos += 4;
    }
    const n = dims.reduce((a, b) => a * b, 1);
    if (pos + 4 * n > data.length) throw new Error(`tensor ${name}: payload truncated`);
    const arr = new Float32Array(n);
    for (let j = 0; j < n; j++) arr[j] = data.readFloatLE(pos + 4 * j);
    pos += 4 * n;
    if (seen.has(name)) throw new Error(`duplicate tensor name ${name}`);
    seen.add(name);
    tensors.push({ name, dims, data: arr });
  }
  if (pos !== data.length) throw new Error(`${data.length - pos} trailing bytes`);
  return tensors;
}
