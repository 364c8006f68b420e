/**
 * Local synthesis: two sine oscillators, one per stereo channel, gliding to
 * each received target frequency over 50 ms. Muted until the first user
 * gesture (browser autoplay policy); fades out within 200 ms on disconnect.
 */

export const GLIDE_SECONDS = 0.05;
export const FADE_OUT_SECONDS = 0.2;
export const VOLUME = 0.2;

/** The slice of Web Audio the sonifier needs; tests supply a fake. */
export interface AudioParamLike {
  value: number;
  cancelScheduledValues(t: number): void;
  setValueAtTime(v: number, t: number): void;
  linearRampToValueAtTime(v: number, t: number): void;
}

export interface AudioNodeLike {
  connect(target: unknown): void;
}

export interface OscillatorLike extends AudioNodeLike {
  type: string;
  frequency: AudioParamLike;
  start(): void;
  stop(): void;
}

export interface GainLike extends AudioNodeLike {
  gain: AudioParamLike;
}

export interface PannerLike extends AudioNodeLike {
  pan: AudioParamLike;
}

export interface AudioContextLike {
  currentTime: number;
  destination: unknown;
  state?: string;
  resume?(): Promise<void> | void;
  createOscillator(): OscillatorLike;
  createGain(): GainLike;
  createStereoPanner(): PannerLike;
}

interface Channel {
  oscillator: OscillatorLike;
  gain: GainLike;
}

export class StereoSonifier {
  private ctx: AudioContextLike;
  private left: Channel;
  private right: Channel;
  private master: GainLike;
  private unlocked = false;

  constructor(ctx: AudioContextLike) {
    this.ctx = ctx;
    this.master = ctx.createGain();
    this.master.gain.value = 0; // silent until unlock()
    this.master.connect(ctx.destination);
    this.left = this.makeChannel(-1);
    this.right = this.makeChannel(+1);
  }

  private makeChannel(pan: -1 | 1): Channel {
    const oscillator = this.ctx.createOscillator();
    oscillator.type = "sine";
    oscillator.frequency.value = 440;
    const gain = this.ctx.createGain();
    gain.gain.value = 0.5;
    const panner = this.ctx.createStereoPanner();
    panner.pan.value = pan;
    oscillator.connect(gain);
    gain.connect(panner);
    panner.connect(this.master);
    oscillator.start();
    return { oscillator, gain };
  }

  get isUnlocked(): boolean {
    return this.unlocked;
  }

  /** First user gesture: resume the context and open the master gain. */
  unlock(): void {
    if (this.unlocked) return;
    this.unlocked = true;
    void this.ctx.resume?.();
    const now = this.ctx.currentTime;
    this.master.gain.cancelScheduledValues(now);
    this.master.gain.setValueAtTime(0, now);
    this.master.gain.linearRampToValueAtTime(VOLUME, now + GLIDE_SECONDS);
  }

  /** Glide both oscillators to the routed targets. */
  setTargets(leftFreq: number, rightFreq: number): void {
    const now = this.ctx.currentTime;
    for (const [channel, freq] of [
      [this.left, leftFreq],
      [this.right, rightFreq],
    ] as const) {
      const param = channel.oscillator.frequency;
      param.cancelScheduledValues(now);
      param.setValueAtTime(param.value, now);
      param.linearRampToValueAtTime(freq, now + GLIDE_SECONDS);
      param.value = freq;
    }
  }

  /** Connection lost: silence within FADE_OUT_SECONDS. */
  fadeOut(): void {
    const now = this.ctx.currentTime;
    this.master.gain.cancelScheduledValues(now);
    this.master.gain.setValueAtTime(this.unlocked ? VOLUME : 0, now);
    this.master.gain.linearRampToValueAtTime(0, now + FADE_OUT_SECONDS);
    this.unlocked = false;
  }
}
