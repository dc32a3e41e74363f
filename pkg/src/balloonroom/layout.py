"""Spatial engine: gaze-cone spawning, collision nudging, height drift,
grab-and-move, and one-click wall organization.

Conventions (frozen):
    x east, z north, y up; the room is the box [0,w] x [0,h] x [0,d].
    Walls: N at z=d, E at x=w, S at z=0, W at x=0.
    Clockwise wall order viewed from above: N -> E -> S -> W.

Collision resolution displaces balloons in the horizontal plane only.
Vertical pushes would corrupt the height-encodes-age reading, so height
changes come exclusively from drift (`height_at`) and never from contact.

All randomness flows through one seeded generator owned by the state, so
an identical (seed, operation sequence) yields bit-identical positions.
"""

from __future__ import annotations

import math
import random

from .errors import UnknownBalloon
from .events import EventDraft, EventKind, warning
from .model import Balloon, GazeState, RoomConfig, Vec3, height_at

EPSILON = 1e-3
SEPARATION_PAD = 1e-3
WALL_MARGIN = 1e-9
USER_CAPSULE_RADIUS = 0.4
MAX_SPAWN_TRIES = 256
MAX_SETTLE_ITERATIONS = 32

WALLS = ("N", "E", "S", "W")


def _dist3(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def _dist_h(a: Vec3, b: Vec3) -> float:
    return math.hypot(a[0] - b[0], a[2] - b[2])


def _horizontal_dir(direction: Vec3) -> tuple[float, float]:
    """Unit (dx, dz) of a gaze direction; faces north if looking straight up/down."""
    dx, dz = direction[0], direction[2]
    n = math.hypot(dx, dz)
    if n < 1e-9:
        return 0.0, 1.0
    return dx / n, dz / n


class Layout:
    """Balloon positions for one session, mutated only by its single writer."""

    def __init__(self, cfg: RoomConfig, rng: random.Random | None = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else random.Random(cfg.rng_seed)
        self.balloons: dict[str, Balloon] = {}
        self.user_pose: GazeState = cfg.default_gaze()
        self.organized_wall: str | None = None

    @property
    def pitch(self) -> float:
        """Organization grid cell size: two max radii plus a visible gap."""
        return 2 * self.cfg.r_max + 0.1

    # -- spawning -----------------------------------------------------------

    def spawn_position(self, gaze: GazeState, radius: float) -> Vec3:
        """Seeded random position inside the gaze cone.

        Constraints: horizontal angle to the gaze direction within the
        half-FOV, horizontal distance to the user within the spawn band,
        y at the fixed spawn height, sphere clear of walls, of the user
        capsule, and of existing balloons. After the rejection budget the
        no-overlap constraint is relaxed and the collision resolver settles
        the result, so a position is always produced.
        """
        for check_overlap in (True, False):
            for _ in range(MAX_SPAWN_TRIES):
                pos = self._sample_cone(gaze)
                if self._spawn_ok(pos, radius, check_overlap):
                    return pos
        return self._fallback_position(gaze, radius)

    def spawn_balloon(
        self, topic_key: str, radius: float, created_at: float
    ) -> tuple[Balloon, list[EventDraft]]:
        """Place a new balloon; returns it plus moves of any displaced neighbors."""
        pos = self.spawn_position(self.user_pose, radius)
        balloon = Balloon(topic_key=topic_key, center=pos, radius=radius,
                          created_at=created_at)
        before = self._positions()
        self.balloons[topic_key] = balloon
        converged = self._settle()
        drafts = self._moved_drafts(before, exclude={topic_key})
        if not converged:
            drafts.append(warning("collision_unsettled",
                                  "residual overlap after settling"))
        return balloon, drafts

    def _sample_cone(self, gaze: GazeState) -> Vec3:
        cfg = self.cfg
        gx, gz = _horizontal_dir(gaze.direction)
        theta = math.radians(self.rng.uniform(-cfg.fov_half_angle, cfg.fov_half_angle))
        dist = self.rng.uniform(cfg.spawn_dist_min, cfg.spawn_dist_max)
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        dx = gx * cos_t + gz * sin_t
        dz = gz * cos_t - gx * sin_t
        return (gaze.origin[0] + dx * dist, cfg.h_spawn, gaze.origin[2] + dz * dist)

    def _spawn_ok(self, pos: Vec3, radius: float, check_overlap: bool) -> bool:
        if not self._sphere_inside(pos, radius):
            return False
        if _dist_h(pos, self.user_pose.origin) < USER_CAPSULE_RADIUS + radius:
            return False
        if check_overlap:
            for b in self.balloons.values():
                if _dist3(pos, b.center) < radius + b.radius:
                    return False
        return True

    def _fallback_position(self, gaze: GazeState, radius: float) -> Vec3:
        # Walk inward along the gaze azimuth until the sphere clears the walls.
        cfg = self.cfg
        gx, gz = _horizontal_dir(gaze.direction)
        dist = cfg.spawn_dist_min
        x = gaze.origin[0] + gx * dist
        z = gaze.origin[2] + gz * dist
        x = min(max(x, radius), cfg.width - radius)
        z = min(max(z, radius), cfg.depth - radius)
        return (x, cfg.h_spawn, z)

    def _sphere_inside(self, pos: Vec3, radius: float) -> bool:
        cfg = self.cfg
        x, y, z = pos
        r = radius + WALL_MARGIN
        return (r <= x <= cfg.width - r
                and r <= y <= cfg.height - r
                and r <= z <= cfg.depth - r)

    # -- collision resolution -----------------------------------------------

    def resolve_collisions(self) -> list[EventDraft]:
        """Iterative horizontal separation of overlapping pairs."""
        before = self._positions()
        converged = self._settle()
        drafts = self._moved_drafts(before)
        if not converged:
            drafts.append(warning("collision_unsettled",
                                  "residual overlap after settling"))
        return drafts

    def _settle(self) -> bool:
        keys = list(self.balloons)
        if len(keys) < 2:
            return True
        for _ in range(MAX_SETTLE_ITERATIONS):
            if self._max_overlap(keys) < EPSILON:
                return True
            for i in range(len(keys)):
                for j in range(i + 1, len(keys)):
                    self._separate(self.balloons[keys[i]], self.balloons[keys[j]])
        return self._max_overlap(keys) < EPSILON

    def _max_overlap(self, keys: list[str]) -> float:
        worst = 0.0
        for i in range(len(keys)):
            for j in range(i + 1, len(keys)):
                a, b = self.balloons[keys[i]], self.balloons[keys[j]]
                worst = max(worst, a.radius + b.radius - _dist3(a.center, b.center))
        return worst

    def _separate(self, a: Balloon, b: Balloon) -> None:
        r_sum = a.radius + b.radius
        if _dist3(a.center, b.center) >= r_sum:
            return
        dy = b.center[1] - a.center[1]
        # Horizontal gap needed so the 3D distance reaches r_sum plus padding.
        target_sq = (r_sum + SEPARATION_PAD) ** 2 - dy * dy
        target_h = math.sqrt(target_sq) if target_sq > 0 else 0.0
        hx, hz = b.center[0] - a.center[0], b.center[2] - a.center[2]
        h = math.hypot(hx, hz)
        if h < 1e-9:
            angle = self.rng.uniform(0, 2 * math.pi)
            ux, uz = math.cos(angle), math.sin(angle)
        else:
            ux, uz = hx / h, hz / h
        shift = (target_h - h) / 2
        if shift <= 0:
            return
        a.center = self._clamp_xz(
            (a.center[0] - ux * shift, a.center[1], a.center[2] - uz * shift), a.radius
        )
        b.center = self._clamp_xz(
            (b.center[0] + ux * shift, b.center[1], b.center[2] + uz * shift), b.radius
        )

    def _clamp_xz(self, pos: Vec3, radius: float) -> Vec3:
        cfg = self.cfg
        return (
            min(max(pos[0], radius), cfg.width - radius),
            pos[1],
            min(max(pos[2], radius), cfg.depth - radius),
        )

    def _clamp_xyz(self, pos: Vec3, radius: float) -> Vec3:
        x, y, z = self._clamp_xz(pos, radius)
        return (x, min(max(y, radius), self.cfg.height - radius), z)

    # -- drift ----------------------------------------------------------------

    def step_drift(self, now: float) -> list[EventDraft]:
        """Raise every unpinned balloon to its age height, then settle."""
        before = self._positions()
        for b in self.balloons.values():
            if b.pinned:
                continue
            b.center = (b.center[0], height_at(b.created_at, now, self.cfg), b.center[2])
        converged = self._settle()
        drafts = self._moved_drafts(before)
        if not converged:
            drafts.append(warning("collision_unsettled",
                                  "residual overlap after settling"))
        return drafts

    # -- manual placement -----------------------------------------------------

    def grab_move(self, topic_key: str, new_center: Vec3) -> list[EventDraft]:
        """Relocate a balloon by hand; it becomes pinned at the (clamped) target."""
        balloon = self.balloons.get(topic_key)
        if balloon is None:
            raise UnknownBalloon(topic_key)
        before = self._positions()
        balloon.center = self._clamp_xyz(new_center, balloon.radius)
        balloon.pinned = True
        converged = self._settle()
        drafts = self._moved_drafts(before, force={topic_key})
        if not converged:
            drafts.append(warning("collision_unsettled",
                                  "residual overlap after settling"))
        return drafts

    # -- organization -----------------------------------------------------------

    def organize(self, gaze: GazeState | None = None) -> list[EventDraft]:
        """Relocate all balloons onto a wall grid chosen by gaze.

        Oldest balloons first (height order for drift-governed balloons),
        rows filled top-to-bottom and left-to-right as seen by the viewer;
        overflow continues on the next wall clockwise. Placement depends
        only on the balloon set and the target wall, so a second call with
        no intervening changes moves nothing.
        """
        gaze = gaze or self.user_pose
        wall = self._gaze_wall(gaze)
        before = self._positions()
        order = sorted(self.balloons.values(), key=lambda b: (b.created_at, b.topic_key))
        overflowed = False
        newly_pinned: set[str] = set()
        for balloon, (pos, layer) in zip(order, self._slots(wall)):
            balloon.center = pos
            if not balloon.pinned:
                balloon.pinned = True
                newly_pinned.add(balloon.topic_key)
            overflowed = overflowed or layer > 0
        drafts = self._moved_drafts(before, force=newly_pinned)
        moved = len(drafts)
        if overflowed:
            drafts.append(warning("organize_overflow",
                                  "walls saturated; stacking an inner layer"))
        drafts.append(EventDraft(EventKind.ORGANIZE_APPLIED, {"wall": wall, "moved": moved}))
        self.organized_wall = wall
        return drafts

    def _gaze_wall(self, gaze: GazeState) -> str:
        ox, oz = gaze.origin[0], gaze.origin[2]
        dx, dz = _horizontal_dir(gaze.direction)
        hits: list[tuple[float, str]] = []
        if dz > 1e-12:
            hits.append(((self.cfg.depth - oz) / dz, "N"))
        if dz < -1e-12:
            hits.append((-oz / dz, "S"))
        if dx > 1e-12:
            hits.append(((self.cfg.width - ox) / dx, "E"))
        if dx < -1e-12:
            hits.append((-ox / dx, "W"))
        if not hits:
            return "N"
        return min(hits)[1]

    def _slots(self, start_wall: str):
        """Yield (position, layer) over walls clockwise from the target wall."""
        start = WALLS.index(start_wall)
        layer = 0
        while True:
            for k in range(4):
                wall = WALLS[(start + k) % 4]
                for pos in self._wall_grid(wall, layer):
                    yield pos, layer
            layer += 1

    def _wall_grid(self, wall: str, layer: int) -> list[Vec3]:
        cfg = self.cfg
        p = self.pitch
        off = cfg.wall_offset + cfg.r_max + layer * p
        length = cfg.width if wall in ("N", "S") else cfg.depth
        # Corner inset keeps grids on adjacent walls from ever touching.
        corner = cfg.wall_offset + p / 2
        lo, hi = corner + p / 2, length - corner - p / 2
        if hi >= lo:
            n_cols = int((hi - lo) / p) + 1
            cols = [lo + i * p for i in range(n_cols)]
        else:
            cols = [length / 2]
        n_rows = max(1, int(cfg.height // p))
        rows = [max(cfg.r_max, cfg.height - p / 2 - k * p) for k in range(n_rows)]

        out: list[Vec3] = []
        for y in rows:  # top to bottom
            for u in cols:  # viewer's left to right
                if wall == "N":
                    out.append((u, y, cfg.depth - off))
                elif wall == "E":
                    out.append((cfg.width - off, y, cfg.depth - u))
                elif wall == "S":
                    out.append((cfg.width - u, y, off))
                else:
                    out.append((off, y, u))
        return out

    # -- bookkeeping -------------------------------------------------------------

    def remove(self, topic_key: str) -> Balloon:
        if topic_key not in self.balloons:
            raise UnknownBalloon(topic_key)
        return self.balloons.pop(topic_key)

    def rekey(self, old_key: str, new_key: str) -> None:
        if old_key not in self.balloons:
            raise UnknownBalloon(old_key)
        self.balloons = {
            (new_key if k == old_key else k): b for k, b in self.balloons.items()
        }
        self.balloons[new_key].topic_key = new_key

    def set_radius(self, topic_key: str, radius: float) -> list[EventDraft]:
        """Resize a balloon and settle any overlap the growth produced."""
        balloon = self.balloons.get(topic_key)
        if balloon is None:
            raise UnknownBalloon(topic_key)
        before = self._positions()
        balloon.radius = radius
        balloon.center = self._clamp_xyz(balloon.center, radius)
        converged = self._settle()
        drafts = self._moved_drafts(before)
        if not converged:
            drafts.append(warning("collision_unsettled",
                                  "residual overlap after settling"))
        return drafts

    def _positions(self) -> dict[str, Vec3]:
        return {k: b.center for k, b in self.balloons.items()}

    def _moved_drafts(
        self,
        before: dict[str, Vec3],
        force: set[str] | None = None,
        exclude: set[str] | None = None,
    ) -> list[EventDraft]:
        drafts = []
        for key, balloon in self.balloons.items():
            if exclude and key in exclude:
                continue
            if key not in before or balloon.center != before[key] or (force and key in force):
                drafts.append(
                    EventDraft(
                        EventKind.BALLOON_MOVED,
                        {
                            "topic_key": key,
                            "position": list(balloon.center),
                            "pinned": balloon.pinned,
                        },
                    )
                )
        return drafts

    # -- persistence --------------------------------------------------------------

    def snapshot(self) -> list[dict]:
        return [
            {
                "topic_key": b.topic_key,
                "center": list(b.center),
                "radius": b.radius,
                "created_at": b.created_at,
                "pinned": b.pinned,
                "alpha": b.alpha,
            }
            for b in self.balloons.values()
        ]

    def load_snapshot(self, docs: list[dict]) -> None:
        self.balloons = {}
        for doc in docs:
            b = Balloon(
                topic_key=doc["topic_key"],
                center=tuple(doc["center"]),
                radius=doc["radius"],
                created_at=doc["created_at"],
                pinned=doc["pinned"],
                alpha=doc.get("alpha", 0.4),
            )
            self.balloons[b.topic_key] = b

    def rng_state_json(self) -> list:
        version, internal, gauss = self.rng.getstate()
        return [version, list(internal), gauss]

    def restore_rng(self, state: list) -> None:
        version, internal, gauss = state
        self.rng.setstate((version, tuple(internal), gauss))
