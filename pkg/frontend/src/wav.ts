// Mono 16-bit PCM WAV encoding. The service decodes exactly this
// layout, so recordings are re-encoded client-side no matter what
// container MediaRecorder produced.

export function floatTo16BitPcm(samples: Float32Array): Int16Array {
  const out = new Int16Array(samples.length);
  for (let i = 0; i < samples.length; i++) {
    const s = Math.max(-1, Math.min(1, samples[i]));
    out[i] = Math.round(s < 0 ? s * 0x8000 : s * 0x7fff);
  }
  return out;
}

export function encodeWavPcm16(samples: Int16Array, sampleRate: number): Uint8Array<ArrayBuffer> {
  const buffer = new ArrayBuffer(44 + samples.length * 2);
  const view = new DataView(buffer);
  const writeStr = (off: number, s: string) => {
    for (let i = 0; i < s.length; i++) view.setUint8(off + i, s.charCodeAt(i));
  };
  writeStr(0, "RIFF");
  view.setUint32(4, 36 + samples.length * 2, true);
  writeStr(8, "WAVEfmt ");
  view.setUint32(16, 16, true);               // fmt chunk size
  view.setUint16(20, 1, true);                // PCM
  view.setUint16(22, 1, true);                // mono
  view.setUint32(24, sampleRate, true);
  view.setUint32(28, sampleRate * 2, true);   // byte rate
  view.setUint16(32, 2, true);                // block align
  view.setUint16(34, 16, true);               // bits per sample
  writeStr(36, "data");
  view.setUint32(40, samples.length * 2, true);
  for (let i = 0; i < samples.length; i++) {
    view.setInt16(44 + i * 2, samples[i], true);
  }
  return new Uint8Array(buffer);
}

export function wavBlobFromFloat(samples: Float32Array, sampleRate: number): Blob {
  const bytes = encodeWavPcm16(floatTo16BitPcm(samples), sampleRate);
  return new Blob([bytes], { type: "audio/wav" });
}
