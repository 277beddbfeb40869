/** Microphone capture straight to a float32 WAV container.
 *
 * MediaRecorder emits compressed codecs the service refuses by design, so
 * samples are pulled from the audio graph and packed into RIFF/float32 at
 * the context rate; the service resamples to 16 kHz on its side.
 */

import type { Recorder } from "./flow";

export class MicrophoneRecorder implements Recorder {
  private context: AudioContext | null = null;
  private stream: MediaStream | null = null;
  private processor: ScriptProcessorNode | null = null;
  private chunks: Float32Array[] = [];

  async start(): Promise<void> {
    this.stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    this.context = new AudioContext();
    const source = this.context.createMediaStreamSource(this.stream);
    this.processor = this.context.createScriptProcessor(4096, 1, 1);
    this.chunks = [];
    this.processor.addEventListener("audioprocess", (event) => {
      this.chunks.push(new Float32Array(event.inputBuffer.getChannelData(0)));
    });
    source.connect(this.processor);
    this.processor.connect(this.context.destination);
  }

  async stop(): Promise<ArrayBuffer> {
    const rate = this.context?.sampleRate ?? 48000;
    this.processor?.disconnect();
    this.stream?.getTracks().forEach((track) => track.stop());
    await this.context?.close();

    const total = this.chunks.reduce((n, c) => n + c.length, 0);
    const samples = new Float32Array(total);
    let offset = 0;
    for (const chunk of this.chunks) {
      samples.set(chunk, offset);
      offset += chunk.length;
    }
    this.chunks = [];
    return encodeFloat32Wav(samples, rate);
  }
}

export function encodeFloat32Wav(samples: Float32Array, rate: number): ArrayBuffer {
  const dataBytes = samples.length * 4;
  const buffer = new ArrayBuffer(44 + dataBytes);
  const view = new DataView(buffer);
  const ascii = (pos: number, text: string) => {
    for (let i = 0; i < text.length; i++) view.setUint8(pos + i, text.charCodeAt(i));
  };
  ascii(0, "RIFF");
  view.setUint32(4, 36 + dataBytes, true);
  ascii(8, "WAVE");
  ascii(12, "fmt ");
  view.setUint32(16, 16, true);
  view.setUint16(20, 3, true); // IEEE float
  view.setUint16(22, 1, true);
  view.setUint32(24, rate, true);
  view.setUint32(28, rate * 4, true);
  view.setUint16(32, 4, true);
  view.setUint16(34, 32, true);
  ascii(36, "data");
  view.setUint32(40, dataBytes, true);
  new Float32Array(buffer, 44).set(samples);
  return buffer;
}
