//! Continuous multi-room navigation environment.
//!
//! The world is a `rows x cols` grid of square rooms separated by
//! zero-thickness walls with door gaps centered on shared walls. States are
//! 2D positions, actions are (speed, heading) pairs, and the dynamics are
//! deterministic: a move whose segment would cross wall material is rejected
//! in full (the agent stays put).
//!
//! Rooms are addressed as `(row, col)` with `(0, 0)` in the bottom-left
//! corner. A layout also names obstacle rooms; obstacles are soft — they only
//! matter through `avoid` predicates, never through the dynamics.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::spec_lang::{AtomKind, AtomicPredicate, AtomResolver, Trajectory};
use crate::types::{Action, Point};

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid layout: {0}")]
    Invalid(String),
}

/// Geometry and topology of a rooms grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomsLayout {
    pub rows: usize,
    pub cols: usize,
    /// Side length of one room.
    pub room_size: f64,
    /// Width of a door gap, centered on the shared wall.
    pub door_width: f64,
    /// Speed bound for actions.
    pub max_speed: f64,
    /// Room containing the initial states.
    pub init_room: (usize, usize),
    /// Half-width of the uniform square of initial states around the initial
    /// room's center.
    pub init_spread: f64,
    /// Radius of the obstacle disc at an obstacle room's center.
    pub obstacle_radius: f64,
    pub obstacles: BTreeSet<(usize, usize)>,
    /// Open doors as normalized pairs of adjacent rooms.
    pub doors: BTreeSet<((usize, usize), (usize, usize))>,
}

fn door_key(a: (usize, usize), b: (usize, usize)) -> ((usize, usize), (usize, usize)) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl RoomsLayout {
    /// Grid with every door open and default geometry.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut layout = RoomsLayout {
            rows,
            cols,
            room_size: 1.0,
            door_width: 0.4,
            max_speed: 0.25,
            init_room: (0, 0),
            init_spread: 0.1,
            obstacle_radius: 0.3,
            obstacles: BTreeSet::new(),
            doors: BTreeSet::new(),
        };
        layout.open_all_doors();
        layout
    }

    pub fn open_all_doors(&mut self) {
        self.doors.clear();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c + 1 < self.cols {
                    self.doors.insert(door_key((r, c), (r, c + 1)));
                }
                if r + 1 < self.rows {
                    self.doors.insert(door_key((r, c), (r + 1, c)));
                }
            }
        }
    }

    pub fn door_open(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        self.doors.contains(&door_key(a, b))
    }

    /// Center of room `(r, c)` in global coordinates.
    pub fn center(&self, r: usize, c: usize) -> Point {
        Point::new((c as f64 + 0.5) * self.room_size, (r as f64 + 0.5) * self.room_size)
    }

    /// Room containing the point (clamped to the grid).
    pub fn room_of(&self, p: Point) -> (usize, usize) {
        let c = ((p.x / self.room_size).floor() as i64).clamp(0, self.cols as i64 - 1);
        let r = ((p.y / self.room_size).floor() as i64).clamp(0, self.rows as i64 - 1);
        (r as usize, c as usize)
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.room_size
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.room_size
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.width() && p.y >= 0.0 && p.y <= self.height()
    }

    fn adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
        let dr = a.0.abs_diff(b.0);
        let dc = a.1.abs_diff(b.1);
        dr + dc == 1
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let e = |m: String| Err(LayoutError::Invalid(m));
        if self.rows == 0 || self.cols == 0 {
            return e("grid must have at least one room".into());
        }
        if !(self.room_size > 0.0) {
            return e("room_size must be positive".into());
        }
        if !(self.door_width > 0.0 && self.door_width < self.room_size) {
            return e("door_width must lie strictly between 0 and room_size".into());
        }
        if !(self.max_speed > 0.0) {
            return e("max_speed must be positive".into());
        }
        if !(self.obstacle_radius > 0.0 && self.obstacle_radius < self.room_size / 2.0) {
            return e("obstacle_radius must lie strictly between 0 and half the room size".into());
        }
        if !(self.init_spread >= 0.0 && self.init_spread < self.room_size / 2.0) {
            return e("init_spread must be non-negative and below half the room size".into());
        }
        if self.init_room.0 >= self.rows || self.init_room.1 >= self.cols {
            return e(format!("init_room {:?} outside the grid", self.init_room));
        }
        for &(r, c) in &self.obstacles {
            if r >= self.rows || c >= self.cols {
                return e(format!("obstacle room ({r}, {c}) outside the grid"));
            }
        }
        for &(a, b) in &self.doors {
            if a.0 >= self.rows || a.1 >= self.cols || b.0 >= self.rows || b.1 >= self.cols {
                return e(format!("door between {a:?} and {b:?} outside the grid"));
            }
            if !Self::adjacent(a, b) {
                return e(format!("door between non-adjacent rooms {a:?} and {b:?}"));
            }
        }
        Ok(())
    }

    /// Parses the key-value layout format.
    ///
    /// ```text
    /// rows = 3
    /// cols = 3
    /// room_size = 1.0        # optional geometry overrides
    /// door_width = 0.4
    /// max_speed = 0.25
    /// init_room = 0 0
    /// init_spread = 0.1
    /// obstacle_radius = 0.3
    /// obstacle = 1 0         # repeatable
    /// doors = all            # or repeated `door = r1 c1 r2 c2` lines
    /// ```
    pub fn parse(text: &str) -> Result<RoomsLayout, LayoutError> {
        let mut rows = None;
        let mut cols = None;
        let mut layout = RoomsLayout {
            rows: 0,
            cols: 0,
            room_size: 1.0,
            door_width: 0.4,
            max_speed: 0.25,
            init_room: (0, 0),
            init_spread: 0.1,
            obstacle_radius: 0.3,
            obstacles: BTreeSet::new(),
            doors: BTreeSet::new(),
        };
        let mut all_doors = false;
        let mut door_lines: Vec<((usize, usize), (usize, usize))> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| LayoutError::Parse {
                line,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let fields: Vec<&str> = value.split_whitespace().collect();
            let err = |message: String| LayoutError::Parse { line, message };
            let one = |fields: &[&str]| -> Result<f64, LayoutError> {
                if fields.len() != 1 {
                    return Err(err(format!("`{key}` expects one value")));
                }
                fields[0].parse().map_err(|_| err(format!("malformed number `{}`", fields[0])))
            };
            let ints = |fields: &[&str], n: usize| -> Result<Vec<usize>, LayoutError> {
                if fields.len() != n {
                    return Err(err(format!("`{key}` expects {n} integers")));
                }
                fields
                    .iter()
                    .map(|f| f.parse().map_err(|_| err(format!("malformed integer `{f}`"))))
                    .collect()
            };
            match key {
                "rows" => rows = Some(one(&fields)? as usize),
                "cols" => cols = Some(one(&fields)? as usize),
                "room_size" => layout.room_size = one(&fields)?,
                "door_width" => layout.door_width = one(&fields)?,
                "max_speed" => layout.max_speed = one(&fields)?,
                "init_spread" => layout.init_spread = one(&fields)?,
                "obstacle_radius" => layout.obstacle_radius = one(&fields)?,
                "init_room" => {
                    let v = ints(&fields, 2)?;
                    layout.init_room = (v[0], v[1]);
                }
                "obstacle" => {
                    let v = ints(&fields, 2)?;
                    layout.obstacles.insert((v[0], v[1]));
                }
                "doors" => {
                    if fields != ["all"] {
                        return Err(err("`doors` only accepts the value `all`".into()));
                    }
                    all_doors = true;
                }
                "door" => {
                    let v = ints(&fields, 4)?;
                    door_lines.push(door_key((v[0], v[1]), (v[2], v[3])));
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }

        layout.rows = rows.ok_or(LayoutError::Invalid("missing `rows`".into()))?;
        layout.cols = cols.ok_or(LayoutError::Invalid("missing `cols`".into()))?;
        if all_doors && !door_lines.is_empty() {
            return Err(LayoutError::Invalid("`doors = all` conflicts with `door` lines".into()));
        }
        if all_doors {
            layout.open_all_doors();
        } else {
            layout.doors = door_lines.into_iter().collect();
        }
        layout.validate()?;
        Ok(layout)
    }
}

/// Room-grid semantics for the DSL atoms:
///
/// * `reach(r, c)`: positive inside the disc of half a room side around the
///   room's center — `1 - dist / (room_size / 2)`.
/// * `avoid(r, c)`: positive outside the obstacle disc at the room's center —
///   `(dist - obstacle_radius) / (room_size / 2)`.
impl AtomResolver for RoomsLayout {
    fn resolve(&self, name: &str, args: &[f64]) -> Result<AtomicPredicate, String> {
        let room = |args: &[f64]| -> Result<(usize, usize), String> {
            if args.len() != 2 {
                return Err(format!("`{name}` expects two room indices"));
            }
            let idx = |a: f64, bound: usize, what: &str| -> Result<usize, String> {
                if a.fract() != 0.0 || a < 0.0 || (a as usize) >= bound {
                    Err(format!("{what} index {a} outside a {}x{} grid", self.rows, self.cols))
                } else {
                    Ok(a as usize)
                }
            };
            Ok((idx(args[0], self.rows, "row")?, idx(args[1], self.cols, "column")?))
        };
        let scale = self.room_size / 2.0;
        match name {
            "reach" => {
                let (r, c) = room(args)?;
                Ok(AtomicPredicate::new(
                    "reach",
                    vec![r as f64, c as f64],
                    AtomKind::Reach { center: self.center(r, c), scale },
                ))
            }
            "avoid" => {
                let (r, c) = room(args)?;
                Ok(AtomicPredicate::new(
                    "avoid",
                    vec![r as f64, c as f64],
                    AtomKind::Avoid {
                        center: self.center(r, c),
                        radius: self.obstacle_radius,
                        scale,
                    },
                ))
            }
            other => Err(format!("unknown atomic predicate `{other}` (expected `reach` or `avoid`)")),
        }
    }
}

/// Wall material: axis-aligned solid segments (door gaps already removed).
#[derive(Debug, Clone, Copy)]
enum Wall {
    Vertical { x: f64, y0: f64, y1: f64 },
    Horizontal { y: f64, x0: f64, x1: f64 },
}

impl Wall {
    /// Does the motion segment `a -> b` touch this wall?
    fn blocks(&self, a: Point, b: Point) -> bool {
        let (d0, d1, lo, hi, a_t, b_t) = match *self {
            Wall::Vertical { x, y0, y1 } => (a.x - x, b.x - x, y0, y1, a.y, b.y),
            Wall::Horizontal { y, x0, x1 } => (a.y - y, b.y - y, x0, x1, a.x, b.x),
        };
        if d0 * d1 > 0.0 {
            return false;
        }
        if d0 == 0.0 && d1 == 0.0 {
            // Sliding along the wall line: blocked if the swept interval
            // touches solid material.
            return a_t.max(b_t) >= lo && a_t.min(b_t) <= hi;
        }
        let t = d0 / (d0 - d1);
        let cross = a_t + t * (b_t - a_t);
        (lo..=hi).contains(&cross)
    }
}

/// The environment: a validated layout plus precomputed wall segments.
#[derive(Debug, Clone)]
pub struct RoomsEnv {
    layout: RoomsLayout,
    walls: Vec<Wall>,
}

impl RoomsEnv {
    pub fn new(layout: RoomsLayout) -> Result<Self, LayoutError> {
        layout.validate()?;
        let walls = build_walls(&layout);
        Ok(RoomsEnv { layout, walls })
    }

    pub fn layout(&self) -> &RoomsLayout {
        &self.layout
    }

    pub fn max_speed(&self) -> f64 {
        self.layout.max_speed
    }

    /// Samples an initial state: uniform on the axis-aligned square of
    /// half-width `init_spread` around the initial room's center.
    pub fn reset(&self, rng: &mut impl Rng) -> Point {
        let c = self.layout.center(self.layout.init_room.0, self.layout.init_room.1);
        let s = self.layout.init_spread;
        if s == 0.0 {
            return c;
        }
        let dx = rng.gen_range(-s..=s);
        let dy = rng.gen_range(-s..=s);
        Point::new(c.x + dx, c.y + dy)
    }

    /// Deterministic dynamics: clamp the action, move along the heading, and
    /// reject the whole move if the segment touches wall material.
    pub fn step(&self, s: Point, a: Action) -> Point {
        let v = a.speed.clamp(0.0, self.layout.max_speed);
        let th = a.angle.clamp(-PI, PI);
        let target = Point::new(s.x + v * th.cos(), s.y + v * th.sin());
        if self.walls.iter().any(|w| w.blocks(s, target)) {
            s
        } else {
            target
        }
    }
}

fn build_walls(layout: &RoomsLayout) -> Vec<Wall> {
    let l = layout.room_size;
    let w = layout.door_width;
    let (width, height) = (layout.width(), layout.height());
    let mut walls = vec![
        Wall::Vertical { x: 0.0, y0: 0.0, y1: height },
        Wall::Vertical { x: width, y0: 0.0, y1: height },
        Wall::Horizontal { y: 0.0, x0: 0.0, x1: width },
        Wall::Horizontal { y: height, x0: 0.0, x1: width },
    ];
    // Interior vertical walls between (r, c-1) and (r, c).
    for c in 1..layout.cols {
        for r in 0..layout.rows {
            let x = c as f64 * l;
            let (y0, y1) = (r as f64 * l, (r + 1) as f64 * l);
            if layout.door_open((r, c - 1), (r, c)) {
                let mid = (r as f64 + 0.5) * l;
                walls.push(Wall::Vertical { x, y0, y1: mid - w / 2.0 });
                walls.push(Wall::Vertical { x, y0: mid + w / 2.0, y1 });
            } else {
                walls.push(Wall::Vertical { x, y0, y1 });
            }
        }
    }
    // Interior horizontal walls between (r-1, c) and (r, c).
    for r in 1..layout.rows {
        for c in 0..layout.cols {
            let y = r as f64 * l;
            let (x0, x1) = (c as f64 * l, (c + 1) as f64 * l);
            if layout.door_open((r - 1, c), (r, c)) {
                let mid = (c as f64 + 0.5) * l;
                walls.push(Wall::Horizontal { y, x0, x1: mid - w / 2.0 });
                walls.push(Wall::Horizontal { y, x0: mid + w / 2.0, x1 });
            } else {
                walls.push(Wall::Horizontal { y, x0, x1 });
            }
        }
    }
    walls
}

/// A state-feedback controller. Implementations may be stateful (e.g. a path
/// policy advancing through its edges).
pub trait Policy {
    fn act(&mut self, s: Point) -> Action;
}

/// Always emits the same action.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub Action);

impl Policy for ConstantPolicy {
    fn act(&mut self, _s: Point) -> Action {
        self.0
    }
}

/// Steers toward a list of waypoints in order, advancing once within `tol`.
#[derive(Debug, Clone)]
pub struct WaypointPolicy {
    pub waypoints: Vec<Point>,
    pub tol: f64,
    pub max_speed: f64,
    next: usize,
}

impl WaypointPolicy {
    pub fn new(waypoints: Vec<Point>, tol: f64, max_speed: f64) -> Self {
        WaypointPolicy { waypoints, tol, max_speed, next: 0 }
    }
}

impl Policy for WaypointPolicy {
    fn act(&mut self, s: Point) -> Action {
        while self.next < self.waypoints.len() && s.dist(self.waypoints[self.next]) <= self.tol {
            self.next += 1;
        }
        let Some(&target) = self.waypoints.get(self.next) else {
            return Action::stop();
        };
        let dist = s.dist(target);
        Action::new(dist.min(self.max_speed), (target.y - s.y).atan2(target.x - s.x))
    }
}

/// Closed-loop rollout of `steps` transitions from `s0`.
pub fn rollout<P: Policy>(env: &RoomsEnv, policy: &mut P, s0: Point, steps: usize) -> Trajectory {
    let mut states = Vec::with_capacity(steps + 1);
    let mut actions = Vec::with_capacity(steps);
    states.push(s0);
    let mut s = s0;
    for _ in 0..steps {
        let a = policy.act(s);
        s = env.step(s, a);
        actions.push(a);
        states.push(s);
    }
    Trajectory::new(states, actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn env9() -> RoomsEnv {
        let mut layout = RoomsLayout::grid(3, 3);
        layout.obstacles.insert((1, 0));
        RoomsEnv::new(layout).unwrap()
    }

    #[test]
    fn step_moves_in_open_space() {
        let env = env9();
        let s = Point::new(0.5, 0.5);
        let s2 = env.step(s, Action::new(0.2, 0.0));
        assert!((s2.x - 0.7).abs() < 1e-12);
        assert!((s2.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_wall_hits_and_passes_door_gaps() {
        let env = env9();
        // Up through the door gap: wall y = 1 has gap x in [0.3, 0.7].
        let s = Point::new(0.5, 0.9);
        let s2 = env.step(s, Action::new(0.2, PI / 2.0));
        assert_eq!(env.layout().room_of(s2), (1, 0));

        // Same move outside the gap is rejected in full.
        let s = Point::new(0.1, 0.9);
        let s2 = env.step(s, Action::new(0.2, PI / 2.0));
        assert_eq!(s2, s);

        // Speed is clamped before the move.
        let s = Point::new(0.5, 0.5);
        let s2 = env.step(s, Action::new(10.0, 0.0));
        assert!((s2.x - 0.75).abs() < 1e-12);
    }

    #[test]
    fn dynamics_are_deterministic() {
        let env = env9();
        let s = Point::new(1.3, 2.2);
        let a = Action::new(0.21, -1.1);
        assert_eq!(env.step(s, a), env.step(s, a));
    }

    #[test]
    fn agent_stays_in_bounds_under_random_actions() {
        let env = env9();
        let mut rng = stream(42);
        let mut s = env.reset(&mut rng);
        for _ in 0..3000 {
            let a = Action::new(rng.gen_range(0.0..0.5), rng.gen_range(-PI..PI));
            s = env.step(s, a);
            assert!(env.layout().in_bounds(s), "escaped to {s}");
        }
    }

    #[test]
    fn reset_is_uniform_on_the_spread_square() {
        let env = env9();
        let c = env.layout().center(0, 0);
        let spread = env.layout().init_spread;
        let mut rng = stream(7);
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let s = env.reset(&mut rng);
            assert!((s.x - c.x).abs() <= spread && (s.y - c.y).abs() <= spread);
            sx += s.x;
            sy += s.y;
        }
        // Law of large numbers: the empirical mean lands near the center.
        assert!((sx / n as f64 - c.x).abs() < 0.01 * env.layout().room_size);
        assert!((sy / n as f64 - c.y).abs() < 0.01 * env.layout().room_size);

        let mut layout = env.layout().clone();
        layout.init_spread = 0.0;
        let env0 = RoomsEnv::new(layout).unwrap();
        assert_eq!(env0.reset(&mut rng), c);
    }

    #[test]
    fn waypoint_controller_reaches_the_diagonal_room() {
        let env = env9();
        let l = env.layout();
        // Route (0,0) -> (1,0) -> (2,0) -> (2,1) -> (2,2) through door centers.
        let mut pts = Vec::new();
        for (a, b) in [((0, 0), (1, 0)), ((1, 0), (2, 0))] {
            let _ = b;
            let door_y = (a.0 as f64 + 1.0) * l.room_size;
            pts.push(Point::new(l.center(a.0, a.1).x, door_y));
            pts.push(l.center(a.0 + 1, a.1));
        }
        for (a, b) in [((2, 0), (2, 1)), ((2, 1), (2, 2))] {
            let _ = b;
            let door_x = (a.1 as f64 + 1.0) * l.room_size;
            pts.push(Point::new(door_x, l.center(a.0, a.1).y));
            pts.push(l.center(a.0, a.1 + 1));
        }
        let budget = (4.0 * (l.room_size / l.max_speed) * (l.rows + l.cols) as f64) as usize;
        let mut policy = WaypointPolicy::new(pts, 0.05, l.max_speed);
        let traj = rollout(&env, &mut policy, l.center(0, 0), budget);
        assert!(traj.states().iter().any(|&s| env.layout().room_of(s) == (2, 2)));
    }

    #[test]
    fn rollout_shapes_and_determinism() {
        let env = env9();
        let s0 = Point::new(0.5, 0.5);
        let mut stop = ConstantPolicy(Action::stop());
        let traj = rollout(&env, &mut stop, s0, 5);
        assert_eq!(traj.len(), 6);
        assert!(traj.states().iter().all(|&s| s == s0));

        let mut p1 = ConstantPolicy(Action::new(0.1, 1.0));
        let mut p2 = ConstantPolicy(Action::new(0.1, 1.0));
        assert_eq!(rollout(&env, &mut p1, s0, 20), rollout(&env, &mut p2, s0, 20));
    }

    #[test]
    fn resolver_grounds_reach_and_avoid() {
        let layout = RoomsLayout::grid(3, 3);
        let reach = layout.resolve("reach", &[2.0, 0.0]).unwrap();
        assert_eq!(reach.eval_quant(layout.center(2, 0)), 1.0);
        // One room side away from the center the value is -1.
        assert_eq!(reach.eval_quant(layout.center(2, 1)), -1.0);

        let avoid = layout.resolve("avoid", &[1.0, 0.0]).unwrap();
        assert!(avoid.eval_quant(layout.center(1, 0)) < 0.0);
        assert!(avoid.eval_quant(layout.center(0, 0)) > 0.0);

        assert!(layout.resolve("reach", &[3.0, 0.0]).is_err());
        assert!(layout.resolve("reach", &[0.5, 0.0]).is_err());
        assert!(layout.resolve("blocked", &[0.0, 0.0]).is_err());
    }

    #[test]
    fn layout_parsing_round_trips_the_presets() {
        let text = "\
# demo
rows = 3
cols = 3
room_size = 1.0
door_width = 0.4
max_speed = 0.25
init_room = 0 0
init_spread = 0.1
obstacle_radius = 0.3
obstacle = 1 0
doors = all
";
        let layout = RoomsLayout::parse(text).unwrap();
        let mut want = RoomsLayout::grid(3, 3);
        want.obstacles.insert((1, 0));
        assert_eq!(layout, want);

        let text = "rows = 2\ncols = 1\ndoor = 0 0 1 0\n";
        let layout = RoomsLayout::parse(text).unwrap();
        assert!(layout.door_open((0, 0), (1, 0)));

        assert!(RoomsLayout::parse("rows = 2\n").is_err());
        assert!(RoomsLayout::parse("rows = 2\ncols = 2\ndoor = 0 0 1 1\n").is_err());
        assert!(RoomsLayout::parse("rows = 2\ncols = 2\nwhat = 1\n").is_err());
    }
}
