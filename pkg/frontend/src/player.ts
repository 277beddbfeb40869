/** Audio playback with a playhead observable both panes mirror. */

export class Player {
  readonly element: HTMLAudioElement;
  private listeners = new Set<(timeS: number) => void>();
  private rafHandle = 0;

  constructor(src: string) {
    this.element = document.createElement("audio");
    this.element.controls = true;
    this.element.preload = "auto";
    this.element.src = src;
    this.element.addEventListener("play", () => this.tick());
    this.element.addEventListener("pause", () => cancelAnimationFrame(this.rafHandle));
    this.element.addEventListener("seeked", () => this.emit());
  }

  onPlayhead(listener: (timeS: number) => void): void {
    this.listeners.add(listener);
  }

  seek(timeS: number): void {
    this.element.currentTime = timeS;
    this.emit();
  }

  private tick = (): void => {
    this.emit();
    if (!this.element.paused) {
      this.rafHandle = requestAnimationFrame(this.tick);
    }
  };

  private emit(): void {
    for (const listener of this.listeners) listener(this.element.currentTime);
  }
}
