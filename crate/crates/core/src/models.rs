//! Built-in dynamics: a hybrid-controlled unicycle with an interval extension,
//! and Euler-discretized linear quadrotor guidance models.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::bounds::AffineModel;
use crate::geometry::Rect;
use crate::validate::Dynamics;

pub const GRAVITY: f64 = 9.81;

/// Closed real interval used by the interval extensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn scale(self, a: f64) -> Self {
        let (p, q) = (a * self.lo, a * self.hi);
        Self::new(p.min(q), p.max(q))
    }

    pub fn mul(self, o: Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Self::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// `self / o` for a divisor interval not containing zero.
    pub fn div(self, o: Self) -> Self {
        assert!(o.lo > 0.0 || o.hi < 0.0, "division by an interval containing zero");
        self.mul(Self::new(1.0 / o.hi, 1.0 / o.lo))
    }

    pub fn hull(self, o: Self) -> Self {
        Self::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    /// Range of `cos` over the interval.
    pub fn cos(self) -> Self {
        trig_range(self, f64::cos, 0.0)
    }

    /// Range of `sin` over the interval.
    pub fn sin(self) -> Self {
        trig_range(self, f64::sin, FRAC_PI_2)
    }
}

/// Range of a unit trig function whose maxima sit at `peak + 2k pi` and
/// minima at `peak + pi + 2k pi`.
fn trig_range(x: Interval, f: fn(f64) -> f64, peak: f64) -> Interval {
    if x.hi - x.lo >= 2.0 * PI {
        return Interval::new(-1.0, 1.0);
    }
    let (a, b) = (f(x.lo), f(x.hi));
    let mut lo = a.min(b);
    let mut hi = a.max(b);
    let hits = |offset: f64| {
        let k = ((x.lo - offset) / (2.0 * PI)).ceil();
        offset + 2.0 * PI * k <= x.hi
    };
    if hits(peak) {
        hi = 1.0;
    }
    if hits(peak + PI) {
        lo = -1.0;
    }
    // Outward rounding guard for the endpoint evaluations.
    Interval::new((lo - 1e-15).max(-1.0), (hi + 1e-15).min(1.0))
}

/// Unicycle `(x, y, theta, v)` with `x' = v cos theta`, `y' = v sin theta`,
/// `theta' = omega`, `v' = a`, Euler step `dt`, under a hybrid controller:
/// feedback linearization of the position output with LQR gains on the
/// resulting double integrators when `|v| >= v_min`, and a heading-projected
/// acceleration with `omega = 0` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnicycleModel {
    pub dt: f64,
    pub sigma: Vec<f64>,
    /// Position reference.
    pub target: [f64; 2],
    /// LQR gains `[k_p, k_d]` of each double integrator.
    pub gains: [f64; 2],
    pub v_min: f64,
}

impl Default for UnicycleModel {
    fn default() -> Self {
        Self {
            dt: 0.01,
            sigma: vec![0.01; 4],
            target: [0.0, 0.0],
            // LQR with Q = I, R = 1 on a double integrator.
            gains: [1.0, 3f64.sqrt()],
            v_min: 0.05,
        }
    }
}

impl UnicycleModel {
    /// Virtual input `u = -k_p (p - target) - k_d p'` of the linearized system.
    fn virtual_input(&self, pos: [f64; 2], vel: [f64; 2]) -> [f64; 2] {
        let [kp, kd] = self.gains;
        [
            -kp * (pos[0] - self.target[0]) - kd * vel[0],
            -kp * (pos[1] - self.target[1]) - kd * vel[1],
        ]
    }

    /// `(omega, a)` at a point.
    pub fn control(&self, s: &[f64]) -> (f64, f64) {
        let (th, v) = (s[2], s[3]);
        let (sn, cs) = th.sin_cos();
        let u = self.virtual_input([s[0], s[1]], [v * cs, v * sn]);
        let a = u[0] * cs + u[1] * sn;
        if v.abs() >= self.v_min {
            ((-u[0] * sn + u[1] * cs) / v, a)
        } else {
            (0.0, a)
        }
    }

    /// Box enclosing the Euler-step mean over `region`. The speed interval is
    /// split at `+-v_min` so that each piece lies in a single controller mode.
    pub fn mean_image(&self, region: &Rect) -> Rect {
        let x = Interval::new(region.lo()[0], region.hi()[0]);
        let y = Interval::new(region.lo()[1], region.hi()[1]);
        let th = Interval::new(region.lo()[2], region.hi()[2]);
        let v = Interval::new(region.lo()[3], region.hi()[3]);
        let mut cuts = vec![v.lo];
        for c in [-self.v_min, self.v_min] {
            if v.lo < c && c < v.hi {
                cuts.push(c);
            }
        }
        cuts.push(v.hi);

        let mut out: Option<[Interval; 4]> = None;
        for w in cuts.windows(2) {
            let piece = Interval::new(w[0], w[1]);
            let img = self.piece_image(x, y, th, piece);
            out = Some(match out {
                None => img,
                Some(o) => [0, 1, 2, 3].map(|d| o[d].hull(img[d])),
            });
        }
        let img = out.expect("at least one speed piece");
        Rect::new_closed(img.iter().map(|i| i.lo).collect(), img.iter().map(|i| i.hi).collect())
            .expect("interval image is well formed")
    }

    fn piece_image(&self, x: Interval, y: Interval, th: Interval, v: Interval) -> [Interval; 4] {
        let [kp, kd] = self.gains;
        let (sn, cs) = (th.sin(), th.cos());
        let vx = v.mul(cs);
        let vy = v.mul(sn);
        let ux = x.sub(Interval::point(self.target[0])).scale(-kp).sub(vx.scale(kd));
        let uy = y.sub(Interval::point(self.target[1])).scale(-kp).sub(vy.scale(kd));
        let a = ux.mul(cs).add(uy.mul(sn));
        let linearized = v.lo >= self.v_min || v.hi <= -self.v_min;
        let omega = if linearized {
            uy.mul(cs).sub(ux.mul(sn)).div(v)
        } else if v.hi <= self.v_min && v.lo >= -self.v_min {
            Interval::point(0.0)
        } else {
            unreachable!("speed pieces are split at +-v_min")
        };
        let dt = self.dt;
        [
            x.add(vx.scale(dt)),
            y.add(vy.scale(dt)),
            th.add(omega.scale(dt)),
            v.add(a.scale(dt)),
        ]
    }
}

impl Dynamics for UnicycleModel {
    fn dim(&self) -> usize {
        4
    }

    fn mean(&self, s: &[f64]) -> Vec<f64> {
        let (omega, a) = self.control(s);
        let dt = self.dt;
        vec![
            s[0] + dt * s[3] * s[2].cos(),
            s[1] + dt * s[3] * s[2].sin(),
            s[2] + dt * omega,
            s[3] + dt * a,
        ]
    }

    fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

/// Lateral channel gains of the quadrotor guidance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub inertia: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// Position reference.
    pub reference: f64,
}

impl ChannelGains {
    /// Places all four closed-loop poles of the lateral chain at `-2`.
    pub fn lateral_default() -> Self {
        let inertia = 0.01;
        Self {
            inertia,
            k1: 8.0 * inertia,
            k2: 24.0 * inertia,
            k3: 32.0 * inertia / GRAVITY,
            k4: 0.5,
            reference: 1.0,
        }
    }

    /// Longitudinal chain: `u' = -g theta` flips the sign of the velocity gain.
    pub fn longitudinal_default() -> Self {
        let inertia = 0.01;
        Self {
            inertia,
            k1: 8.0 * inertia,
            k2: 24.0 * inertia,
            k3: -32.0 * inertia / GRAVITY,
            k4: 0.5,
            reference: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalGains {
    pub mass: f64,
    pub k1: f64,
    pub k2: f64,
    /// Reference force `Fr`.
    pub fr: f64,
}

impl VerticalGains {
    /// Double pole at `-2`, equilibrium altitude 2.
    pub fn default_gains() -> Self {
        let mass = 1.0;
        let k1 = 4.0 * mass;
        Self {
            mass,
            k1,
            k2: 4.0 * mass,
            fr: -2.0 * k1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadrotorConfig {
    pub dt: f64,
    pub sigma: f64,
    pub lateral: ChannelGains,
    pub vertical: VerticalGains,
    pub longitudinal: ChannelGains,
}

impl Default for QuadrotorConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            sigma: 0.01,
            lateral: ChannelGains::lateral_default(),
            vertical: VerticalGains::default_gains(),
            longitudinal: ChannelGains::longitudinal_default(),
        }
    }
}

/// Writes one four-state attitude/position chain into `(a, c)` at `offset`.
/// `accel_sign` is `+1` for `v' = g phi` and `-1` for `u' = -g theta`.
fn chain(a: &mut [Vec<f64>], c: &mut [f64], offset: usize, g: &ChannelGains, accel_sign: f64) {
    let (pos, vel, ang, rate) = (offset, offset + 1, offset + 2, offset + 3);
    a[pos][vel] = 1.0;
    a[vel][ang] = accel_sign * GRAVITY;
    a[ang][rate] = 1.0;
    let i = g.inertia;
    a[rate][rate] = -g.k1 / i;
    a[rate][ang] = -g.k2 / i;
    a[rate][vel] = -g.k3 / i;
    a[rate][pos] = -g.k3 * g.k4 / i;
    c[rate] = g.k3 * g.k4 * g.reference / i;
}

/// `x+ = (I + dt A) x + dt c`.
fn euler(a: Vec<Vec<f64>>, c: Vec<f64>, dt: f64, sigma: f64) -> AffineModel {
    let n = c.len();
    let a = a
        .into_iter()
        .enumerate()
        .map(|(r, row)| {
            row.into_iter()
                .enumerate()
                .map(|(k, v)| if r == k { 1.0 + dt * v } else { dt * v })
                .collect()
        })
        .collect();
    AffineModel {
        a,
        c: c.into_iter().map(|v| dt * v).collect(),
        sigma: vec![sigma; n],
    }
}

/// Lateral-vertical model over `(y, v, phi, p, z, w)`.
pub fn quadrotor6d(cfg: &QuadrotorConfig) -> AffineModel {
    let mut a = vec![vec![0.0; 6]; 6];
    let mut c = vec![0.0; 6];
    chain(&mut a, &mut c, 0, &cfg.lateral, 1.0);
    let vg = &cfg.vertical;
    a[4][5] = 1.0;
    a[5][4] = -vg.k1 / vg.mass;
    a[5][5] = -vg.k2 / vg.mass;
    c[5] = -vg.fr / vg.mass;
    euler(a, c, cfg.dt, cfg.sigma)
}

/// Lateral-longitudinal model over `(y, v, phi, p, x, u, theta, q)`.
pub fn quadrotor8d(cfg: &QuadrotorConfig) -> AffineModel {
    let mut a = vec![vec![0.0; 8]; 8];
    let mut c = vec![0.0; 8];
    chain(&mut a, &mut c, 0, &cfg.lateral, 1.0);
    chain(&mut a, &mut c, 4, &cfg.longitudinal, -1.0);
    euler(a, c, cfg.dt, cfg.sigma)
}
