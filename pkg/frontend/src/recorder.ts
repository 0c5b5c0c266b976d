// Browser-side capture. MediaRecorder hands back whatever compressed
// container the browser prefers; that blob is decoded and re-encoded
// as 16-bit PCM WAV so the service only ever sees one format.

import { wavBlobFromFloat } from "./wav.js";

export interface Recording {
  wav: Blob;
  durationS: number;
}

export interface RecordingSession {
  stop(): Promise<Recording>;
}

export async function startRecording(): Promise<RecordingSession> {
  const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
  const rec = new MediaRecorder(stream);
  const chunks: Blob[] = [];
  rec.ondataavailable = (e) => {
    if (e.data && e.data.size > 0) chunks.push(e.data);
  };
  rec.start();
  return {
    stop: () =>
      new Promise<Recording>((resolve, reject) => {
        rec.onstop = () => {
          stream.getTracks().forEach((t) => t.stop());
          blobToWav(new Blob(chunks, { type: rec.mimeType })).then(resolve, reject);
        };
        rec.stop();
      }),
  };
}

/** Decode any audio blob the browser understands and re-encode as WAV. */
export async function blobToWav(blob: Blob): Promise<Recording> {
  const ctx = new AudioContext();
  try {
    const decoded = await ctx.decodeAudioData(await blob.arrayBuffer());
    const mono = decoded.getChannelData(0);
    return {
      wav: wavBlobFromFloat(mono, decoded.sampleRate),
      durationS: decoded.duration,
    };
  } finally {
    void ctx.close();
  }
}
