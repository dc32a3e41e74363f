// Browser speech recognition with a guaranteed text-box fallback.

export class SpeechInput {
  readonly supported: boolean;
  private rec: any;
  private onText: (text: string) => void;
  private running = false;

  constructor(onText: (text: string) => void) {
    this.onText = onText;
    const SR =
      (window as any).SpeechRecognition || (window as any).webkitSpeechRecognition;
    this.supported = !!SR;
    if (!this.supported) return;

    this.rec = new SR();
    this.rec.continuous = true;
    this.rec.interimResults = false;
    this.rec.lang = "en-US";
    this.rec.onresult = (e: any) => {
      for (let i = e.resultIndex; i < e.results.length; i++) {
        const text = e.results[i]?.[0]?.transcript?.trim();
        if (text) this.onText(text);
      }
    };
    this.rec.onerror = () => this.stop();
  }

  start(): boolean {
    if (!this.supported || this.running) return this.running;
    try {
      this.rec.start();
      this.running = true;
    } catch {
      this.running = false;
    }
    return this.running;
  }

  stop(): void {
    if (this.supported && this.running) {
      try {
        this.rec.stop();
      } catch {
        /* already stopped */
      }
    }
    this.running = false;
  }
}
