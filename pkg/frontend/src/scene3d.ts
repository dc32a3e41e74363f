// three.js rendering layer: declarative over SceneState, plus the transition
// animations (floor portal + ascent + pop, start-balloon timer) and pointer
// interaction (hover button, click panel, drag to relocate).

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { topicHue } from "./palette";
import type { SceneBalloon, SceneState } from "./sceneState";
import type { Vec3 } from "./protocol";

const ROOM = { width: 6, height: 3.5, depth: 6 };
const ASCENT_SECONDS = 1.2;

interface BalloonVisual {
  group: THREE.Group;
  sphere: THREE.Mesh;
  label: THREE.Sprite;
  targetPos: THREE.Vector3;
  targetRadius: number;
  ascentStart: number | null; // animation clock time, null when settled
  portal: THREE.Mesh | null;
}

export interface SceneHooks {
  onBalloonClick: (id: string) => void;
  onBalloonDrag: (id: string, position: Vec3) => void;
  onGaze: (origin: Vec3, direction: Vec3) => void;
}

export class BalloonScene {
  readonly renderer: THREE.WebGLRenderer;
  readonly camera: THREE.PerspectiveCamera;
  readonly scene: THREE.Scene;
  private controls: OrbitControls;
  private visuals = new Map<string, BalloonVisual>();
  private clock = new THREE.Clock();
  private raycaster = new THREE.Raycaster();
  private pointer = new THREE.Vector2();
  private hovered: string | null = null;
  private dragging: { id: string; plane: THREE.Plane } | null = null;
  private lastGazeSent = 0;
  private timerSprite: THREE.Sprite | null = null;
  private timerStartedAt: number | null = null;
  private audio: AudioContext | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private hooks: SceneHooks,
  ) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setSize(canvas.clientWidth, canvas.clientHeight, false);
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0xf4efe8);

    this.camera = new THREE.PerspectiveCamera(
      60,
      canvas.clientWidth / canvas.clientHeight,
      0.05,
      50,
    );
    this.camera.position.set(ROOM.width / 2, 1.6, ROOM.depth / 2 - 1.5);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(ROOM.width / 2, 1.5, ROOM.depth / 2 + 1.0);
    this.controls.update();

    this.buildRoom();
    canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    canvas.addEventListener("pointerup", () => this.onPointerUp());
    window.addEventListener("resize", () => this.onResize());
    this.renderer.setAnimationLoop(() => this.tick());
  }

  private buildRoom(): void {
    const floor = new THREE.Mesh(
      new THREE.PlaneGeometry(ROOM.width, ROOM.depth),
      new THREE.MeshBasicMaterial({ color: 0xe8dcc8 }),
    );
    floor.rotation.x = -Math.PI / 2;
    floor.position.set(ROOM.width / 2, 0, ROOM.depth / 2);
    this.scene.add(floor);

    const grid = new THREE.GridHelper(ROOM.width, 12, 0xc9b896, 0xd9cbb0);
    grid.position.set(ROOM.width / 2, 0.001, ROOM.depth / 2);
    this.scene.add(grid);

    const box = new THREE.Box3(
      new THREE.Vector3(0, 0, 0),
      new THREE.Vector3(ROOM.width, ROOM.height, ROOM.depth),
    );
    this.scene.add(new THREE.Box3Helper(box, new THREE.Color(0xa08a62)));

    this.scene.add(new THREE.AmbientLight(0xffffff, 0.9));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(2, 6, 2);
    this.scene.add(sun);
  }

  /** Reconcile visuals with the reduced state; new ids get the portal ascent. */
  sync(state: SceneState): void {
    for (const [id, balloon] of state.balloons) {
      let visual = this.visuals.get(id);
      if (!visual) {
        visual = this.createVisual(balloon);
        this.visuals.set(id, visual);
      }
      visual.targetPos.set(...balloon.position);
      if (visual.targetRadius !== balloon.radius) {
        visual.targetRadius = balloon.radius;
      }
      const material = visual.sphere.material as THREE.MeshStandardMaterial;
      material.opacity = balloon.alpha;
      this.setLabel(visual.label, balloon.label);
    }
    for (const [id, visual] of this.visuals) {
      if (!state.balloons.has(id)) {
        this.disposeVisual(visual);
        this.visuals.delete(id);
        if (this.hovered === id) this.hovered = null;
      }
    }
    if (state.timerStartedAt !== null && this.timerStartedAt === null) {
      this.timerStartedAt = this.clock.elapsedTime;
      this.spawnTimer();
    }
  }

  private createVisual(balloon: SceneBalloon): BalloonVisual {
    const group = new THREE.Group();
    const color = new THREE.Color().setHSL(topicHue(balloon.id) / 360, 0.62, 0.58);
    const sphere = new THREE.Mesh(
      new THREE.SphereGeometry(1, 24, 18),
      new THREE.MeshStandardMaterial({
        color,
        transparent: true,
        opacity: balloon.alpha,
        roughness: 0.35,
      }),
    );
    sphere.scale.setScalar(balloon.radius);
    sphere.userData.balloonId = balloon.id;
    group.add(sphere);

    const label = new THREE.Sprite(
      new THREE.SpriteMaterial({ map: null, transparent: true }),
    );
    this.setLabel(label, balloon.label);
    label.position.y = balloon.radius + 0.22;
    group.add(label);

    // Portal on the floor below the spawn point; the balloon rises out of it.
    const portal = new THREE.Mesh(
      new THREE.RingGeometry(0.25, 0.45, 40),
      new THREE.MeshBasicMaterial({
        color: 0x7a5cff,
        side: THREE.DoubleSide,
        transparent: true,
        opacity: 0.85,
      }),
    );
    portal.rotation.x = -Math.PI / 2;
    portal.position.set(balloon.position[0], 0.012, balloon.position[2]);
    this.scene.add(portal);

    group.position.set(balloon.position[0], 0.05, balloon.position[2]);
    this.scene.add(group);

    return {
      group,
      sphere,
      label,
      targetPos: new THREE.Vector3(...balloon.position),
      targetRadius: balloon.radius,
      ascentStart: this.clock.elapsedTime,
      portal,
    };
  }

  private disposeVisual(visual: BalloonVisual): void {
    this.scene.remove(visual.group);
    if (visual.portal) this.scene.remove(visual.portal);
    visual.sphere.geometry.dispose();
    (visual.sphere.material as THREE.Material).dispose();
  }

  private setLabel(sprite: THREE.Sprite, text: string): void {
    if (sprite.userData.text === text) return;
    sprite.userData.text = text;
    const canvas = document.createElement("canvas");
    canvas.width = 512;
    canvas.height = 128;
    const ctx = canvas.getContext("2d")!;
    ctx.font = "bold 56px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillStyle = "#3b2f1d";
    ctx.fillText(text, 256, 64);
    const texture = new THREE.CanvasTexture(canvas);
    (sprite.material as THREE.SpriteMaterial).map?.dispose();
    (sprite.material as THREE.SpriteMaterial).map = texture;
    (sprite.material as THREE.SpriteMaterial).needsUpdate = true;
    sprite.scale.set(1.3, 0.33, 1);
  }

  private spawnTimer(): void {
    const sprite = new THREE.Sprite(
      new THREE.SpriteMaterial({ transparent: true }),
    );
    sprite.position.set(ROOM.width - 0.6, ROOM.height - 0.4, ROOM.depth - 0.6);
    this.timerSprite = sprite;
    this.scene.add(sprite);
  }

  private updateTimer(): void {
    if (!this.timerSprite || this.timerStartedAt === null) return;
    const total = Math.floor(this.clock.elapsedTime - this.timerStartedAt);
    const mm = String(Math.floor(total / 60)).padStart(2, "0");
    const ss = String(total % 60).padStart(2, "0");
    this.setLabel(this.timerSprite as unknown as THREE.Sprite, `${mm}:${ss}`);
    this.timerSprite.scale.set(0.8, 0.2, 1);
  }

  private pop(): void {
    try {
      this.audio ??= new AudioContext();
      const osc = this.audio.createOscillator();
      const gain = this.audio.createGain();
      osc.frequency.value = 660;
      gain.gain.setValueAtTime(0.15, this.audio.currentTime);
      gain.gain.exponentialRampToValueAtTime(0.001, this.audio.currentTime + 0.12);
      osc.connect(gain).connect(this.audio.destination);
      osc.start();
      osc.stop(this.audio.currentTime + 0.12);
    } catch {
      /* audio not available; the scene still works silently */
    }
  }

  private tick(): void {
    const now = this.clock.getElapsedTime();
    for (const visual of this.visuals.values()) {
      if (visual.ascentStart !== null) {
        const k = Math.min((now - visual.ascentStart) / ASCENT_SECONDS, 1);
        const eased = 1 - Math.pow(1 - k, 3);
        visual.group.position.set(
          visual.targetPos.x,
          0.05 + (visual.targetPos.y - 0.05) * eased,
          visual.targetPos.z,
        );
        if (k >= 1) {
          // Arrived: the portal closes and the pop announces the balloon.
          visual.ascentStart = null;
          this.pop();
          if (visual.portal) {
            this.scene.remove(visual.portal);
            visual.portal = null;
          }
        }
      } else {
        visual.group.position.lerp(visual.targetPos, 0.18);
      }
      const scale = visual.sphere.scale.x;
      const next = scale + (visual.targetRadius - scale) * 0.2;
      visual.sphere.scale.setScalar(next);
      visual.label.position.y = next + 0.22;
    }
    this.updateTimer();
    this.controls.update();
    this.sendGaze(now);
    this.renderer.render(this.scene, this.camera);
  }

  private sendGaze(now: number): void {
    if (now - this.lastGazeSent < 0.1) return; // <= 10 Hz
    this.lastGazeSent = now;
    const dir = new THREE.Vector3();
    this.camera.getWorldDirection(dir);
    const p = this.camera.position;
    this.hooks.onGaze([p.x, p.y, p.z], [dir.x, dir.y, dir.z]);
  }

  private pickBalloon(e: PointerEvent): string | null {
    const rect = this.canvas.getBoundingClientRect();
    this.pointer.set(
      ((e.clientX - rect.left) / rect.width) * 2 - 1,
      -((e.clientY - rect.top) / rect.height) * 2 + 1,
    );
    this.raycaster.setFromCamera(this.pointer, this.camera);
    const spheres = [...this.visuals.values()].map((v) => v.sphere);
    const hit = this.raycaster.intersectObjects(spheres, false)[0];
    return hit ? (hit.object.userData.balloonId as string) : null;
  }

  private onPointerMove(e: PointerEvent): void {
    if (this.dragging) {
      const rect = this.canvas.getBoundingClientRect();
      this.pointer.set(
        ((e.clientX - rect.left) / rect.width) * 2 - 1,
        -((e.clientY - rect.top) / rect.height) * 2 + 1,
      );
      this.raycaster.setFromCamera(this.pointer, this.camera);
      const point = new THREE.Vector3();
      if (this.raycaster.ray.intersectPlane(this.dragging.plane, point)) {
        const visual = this.visuals.get(this.dragging.id);
        visual?.targetPos.copy(point);
        visual?.group.position.copy(point);
      }
      return;
    }
    this.hovered = this.pickBalloon(e);
    this.canvas.style.cursor = this.hovered ? "pointer" : "default";
  }

  private onPointerDown(e: PointerEvent): void {
    const id = this.pickBalloon(e);
    if (!id) return;
    if (e.shiftKey) {
      // Shift-drag relocates; plain click opens the panel (handled on up).
      const visual = this.visuals.get(id)!;
      const normal = new THREE.Vector3();
      this.camera.getWorldDirection(normal);
      this.dragging = {
        id,
        plane: new THREE.Plane().setFromNormalAndCoplanarPoint(
          normal,
          visual.group.position,
        ),
      };
      this.controls.enabled = false;
    } else {
      this.hooks.onBalloonClick(id);
    }
  }

  private onPointerUp(): void {
    if (!this.dragging) return;
    const { id } = this.dragging;
    const visual = this.visuals.get(id);
    this.dragging = null;
    this.controls.enabled = true;
    if (visual) {
      const p = visual.group.position;
      this.hooks.onBalloonDrag(id, [p.x, p.y, p.z]);
    }
  }

  private onResize(): void {
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
    this.renderer.setSize(w, h, false);
  }
}
