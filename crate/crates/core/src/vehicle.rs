//! Kinematics of a truck towing one off-axle hitched trailer.
//!
//! The state is the trailer axle center, the trailer heading and the truck
//! heading; the truck is driven by its longitudinal velocity `v0` and yaw
//! rate `omega0`.

use std::f64::consts::PI;

use num_dual::DualNum;

use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub px1: f64,
    pub py1: f64,
    pub theta1: f64,
    pub theta0: f64,
}

impl State {
    pub const fn new(px1: f64, py1: f64, theta1: f64, theta0: f64) -> Self {
        Self {
            px1,
            py1,
            theta1,
            theta0,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.px1, self.py1, self.theta1, self.theta0]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Componentwise `self + s * (other - self)`.
    pub fn lerp(&self, other: &State, s: f64) -> State {
        let a = self.to_array();
        let b = other.to_array();
        State::from_array(std::array::from_fn(|i| a[i] + s * (b[i] - a[i])))
    }

    /// Shifts both headings by the same multiple of 2π so that `theta1` lies
    /// within π of `reference`.
    pub fn unwrapped_near(&self, reference: f64) -> State {
        let shift = ((reference - self.theta1) / (2.0 * PI)).round() * 2.0 * PI;
        let theta1 = self.theta1 + shift;
        // keep the articulation angle in (-π, π]
        let theta0 = theta1 + wrap_angle(self.theta0 - self.theta1);
        State::new(self.px1, self.py1, theta1, theta0)
    }
}

/// Time derivative of [`State`].
pub type StateDerivative = State;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Control {
    pub v0: f64,
    pub omega0: f64,
}

impl Control {
    pub const ZERO: Control = Control {
        v0: 0.0,
        omega0: 0.0,
    };

    pub const fn new(v0: f64, omega0: f64) -> Self {
        Self { v0, omega0 }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.v0, self.omega0]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }

    pub fn lerp(&self, other: &Control, s: f64) -> Control {
        Control::new(
            self.v0 + s * (other.v0 - self.v0),
            self.omega0 + s * (other.omega0 - self.omega0),
        )
    }

    pub fn clamp(&self, lo: &Control, hi: &Control) -> Control {
        Control::new(
            self.v0.clamp(lo.v0, hi.v0),
            self.omega0.clamp(lo.omega0, hi.omega0),
        )
    }
}

/// Rectangle around an axle center, in the body frame (x forward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyRect {
    pub length_front: f64,
    pub length_rear: f64,
    pub half_width: f64,
}

impl BodyRect {
    pub fn length(&self) -> f64 {
        self.length_front + self.length_rear
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Hitch to trailer axle.
    pub l1: f64,
    /// Truck axle to hitch.
    pub m0: f64,
    pub truck_body: BodyRect,
    pub trailer_body: BodyRect,
    pub u_min: Control,
    pub u_max: Control,
    pub du_min: Control,
    pub du_max: Control,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            l1: 0.6,
            m0: 0.05,
            truck_body: BodyRect {
                length_front: 0.35,
                length_rear: 0.10,
                half_width: 0.15,
            },
            trailer_body: BodyRect {
                length_front: 0.40,
                length_rear: 0.20,
                half_width: 0.15,
            },
            u_min: Control::new(-0.5, -1.5),
            u_max: Control::new(0.5, 1.5),
            du_min: Control::new(-1.0, -3.0),
            du_max: Control::new(1.0, 3.0),
            beta_min: -1.2,
            beta_max: 1.2,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |what: &str| Err(CoreError::InvalidParams(what.to_string()));
        let all = [
            self.l1,
            self.m0,
            self.beta_min,
            self.beta_max,
            self.truck_body.length_front,
            self.truck_body.length_rear,
            self.truck_body.half_width,
            self.trailer_body.length_front,
            self.trailer_body.length_rear,
            self.trailer_body.half_width,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if self.l1 <= 0.0 {
            return bad("L1 must be positive");
        }
        if self.m0 < 0.0 {
            return bad("M0 must be nonnegative");
        }
        for body in [&self.truck_body, &self.trailer_body] {
            if body.half_width <= 0.0 || body.length() <= 0.0 {
                return bad("body dimensions must be positive");
            }
        }
        if !(self.u_min.v0 < self.u_max.v0 && self.u_min.omega0 < self.u_max.omega0) {
            return bad("u_min must be below u_max");
        }
        if !(self.du_min.v0 < self.du_max.v0 && self.du_min.omega0 < self.du_max.omega0) {
            return bad("du_min must be below du_max");
        }
        if !(self.beta_min < 0.0 && 0.0 < self.beta_max) {
            return bad("beta bounds must straddle zero");
        }
        Ok(())
    }

    /// Largest forward or backward speed.
    pub fn v_max(&self) -> f64 {
        self.u_max.v0.abs().max(self.u_min.v0.abs())
    }
}

/// Wraps to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Articulation angle `θ0 - θ1` wrapped to (-π, π].
pub fn beta01(x: &State) -> f64 {
    wrap_angle(x.theta0 - x.theta1)
}

/// Longitudinal velocity of the trailer axle center.
pub fn trailer_speed(x: &State, u: &Control, p: &VehicleParams) -> f64 {
    let beta = x.theta0 - x.theta1;
    u.v0 * beta.cos() + p.m0 * beta.sin() * u.omega0
}

pub(crate) fn ode_dual<D: DualNum<Primitive = f64>>(
    x: &[D; 4],
    u: &[D; 2],
    l1: f64,
    m0: f64,
) -> [D; 4] {
    let beta = x[3].clone() - x[2].clone();
    let (sb, cb) = (beta.sin(), beta.cos());
    let v1 = u[0].clone() * cb.clone() + sb.clone() * u[1].clone() * m0;
    [
        v1.clone() * x[2].cos(),
        v1 * x[2].sin(),
        (u[0].clone() * sb - cb * u[1].clone() * m0) / l1,
        u[1].clone(),
    ]
}

pub fn ode(x: &State, u: &Control, p: &VehicleParams) -> StateDerivative {
    State::from_array(ode_dual(&x.to_array(), &u.to_array(), p.l1, p.m0))
}

/// One RK4 step with the control interpolated linearly from `u0` to `u1`.
pub(crate) fn rk4_dual<D: DualNum<Primitive = f64>>(
    x: &[D; 4],
    u0: &[D; 2],
    u1: &[D; 2],
    dt: &D,
    l1: f64,
    m0: f64,
) -> [D; 4] {
    let um: [D; 2] = std::array::from_fn(|i| (u0[i].clone() + u1[i].clone()) * 0.5);
    let shift = |k: &[D; 4], h: f64| -> [D; 4] {
        std::array::from_fn(|i| x[i].clone() + k[i].clone() * dt.clone() * h)
    };
    let k1 = ode_dual(x, u0, l1, m0);
    let k2 = ode_dual(&shift(&k1, 0.5), &um, l1, m0);
    let k3 = ode_dual(&shift(&k2, 0.5), &um, l1, m0);
    let k4 = ode_dual(&shift(&k3, 1.0), u1, l1, m0);
    std::array::from_fn(|i| {
        x[i].clone()
            + (k1[i].clone() + k2[i].clone() * 2.0 + k3[i].clone() * 2.0 + k4[i].clone())
                * dt.clone()
                / 6.0
    })
}

/// `substeps` RK4 steps over `dt`, control linear from `u0` to `u1`.
pub(crate) fn integrate_interval_dual<D: DualNum<Primitive = f64>>(
    x: &[D; 4],
    u0: &[D; 2],
    u1: &[D; 2],
    dt: &D,
    substeps: usize,
    l1: f64,
    m0: f64,
) -> [D; 4] {
    let m = substeps.max(1);
    let h = dt.clone() / m as f64;
    let mut state = x.clone();
    for i in 0..m {
        let a = i as f64 / m as f64;
        let b = (i + 1) as f64 / m as f64;
        let ua: [D; 2] =
            std::array::from_fn(|c| u0[c].clone() + (u1[c].clone() - u0[c].clone()) * a);
        let ub: [D; 2] =
            std::array::from_fn(|c| u0[c].clone() + (u1[c].clone() - u0[c].clone()) * b);
        state = rk4_dual(&state, &ua, &ub, &h, l1, m0);
    }
    state
}

pub fn rk4_step(x: &State, u0: &Control, u1: &Control, dt: f64, p: &VehicleParams) -> State {
    State::from_array(rk4_dual(
        &x.to_array(),
        &u0.to_array(),
        &u1.to_array(),
        &dt,
        p.l1,
        p.m0,
    ))
}

/// States at every control node when the piecewise-linear control sequence is
/// applied over total time `t` (uniform intervals).
pub fn shoot(
    x: &State,
    controls: &[Control],
    t: f64,
    p: &VehicleParams,
    substeps_per_interval: usize,
) -> Vec<State> {
    assert!(controls.len() >= 2, "need at least two control nodes");
    let dt = t / (controls.len() - 1) as f64;
    let mut out = Vec::with_capacity(controls.len());
    out.push(*x);
    let mut cur = x.to_array();
    for w in controls.windows(2) {
        cur = integrate_interval_dual(
            &cur,
            &w[0].to_array(),
            &w[1].to_array(),
            &dt,
            substeps_per_interval,
            p.l1,
            p.m0,
        );
        out.push(State::from_array(cur));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_params() -> VehicleParams {
        VehicleParams {
            l1: 1.0,
            m0: 0.1,
            ..VehicleParams::default()
        }
    }

    fn euler(x: &State, u0: &Control, u1: &Control, dt: f64, p: &VehicleParams, n: usize) -> State {
        let h = dt / n as f64;
        let mut s = *x;
        for i in 0..n {
            let u = u0.lerp(u1, i as f64 / n as f64);
            let d = ode(&s, &u, p);
            s = State::new(
                s.px1 + h * d.px1,
                s.py1 + h * d.py1,
                s.theta1 + h * d.theta1,
                s.theta0 + h * d.theta0,
            );
        }
        s
    }

    #[test]
    fn ode_hand_cases() {
        let p = unit_params();
        assert_eq!(ode(&State::default(), &Control::ZERO, &p), State::default());
        assert_eq!(
            ode(&State::default(), &Control::new(1.0, 0.0), &p),
            State::new(1.0, 0.0, 0.0, 0.0)
        );
        let d = ode(
            &State::new(0.0, 0.0, 0.0, PI / 2.0),
            &Control::new(1.0, 0.0),
            &p,
        );
        assert_abs_diff_eq!(d.px1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.py1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.theta1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.theta0, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn beta_wraps() {
        assert_eq!(beta01(&State::default()), 0.0);
        assert_abs_diff_eq!(beta01(&State::new(0.0, 0.0, 0.0, PI / 2.0)), PI / 2.0);
        assert_abs_diff_eq!(
            beta01(&State::new(0.0, 0.0, 0.1, 0.1 + 2.0 * PI)),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
    }

    #[test]
    fn rk4_cases() {
        let p = unit_params();
        let u = Control::new(1.0, 0.0);
        assert_eq!(
            rk4_step(&State::default(), &u, &u, 1.0, &p),
            State::new(1.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(
            rk4_step(&State::default(), &Control::ZERO, &Control::ZERO, 1.0, &p),
            State::default()
        );

        let p = VehicleParams::default();
        let x = State::new(0.0, 0.0, 0.0, 0.3);
        let u = Control::new(-0.5, 0.0);
        let a = rk4_step(&x, &u, &u, 0.2, &p).to_array();
        let b = euler(&x, &u, &u, 0.2, &p, 10_000).to_array();
        for i in 0..4 {
            assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn shoot_cases() {
        let p = unit_params();
        let u = Control::new(1.0, 0.0);
        let xs = shoot(&State::default(), &[u, u], 2.0, &p, 1);
        assert_eq!(*xs.last().unwrap(), State::new(2.0, 0.0, 0.0, 0.0));
        let x = State::new(1.0, 2.0, 0.3, 0.5);
        assert!(shoot(&x, &[Control::ZERO; 5], 3.0, &p, 4)
            .iter()
            .all(|s| *s == x));
    }

    #[test]
    fn shoot_converges_at_fourth_order() {
        let p = VehicleParams::default();
        let x = State::new(0.0, 0.0, 0.2, 0.6);
        let controls = [
            Control::new(0.4, 1.0),
            Control::new(-0.3, -1.2),
            Control::new(0.2, 0.8),
        ];
        let t = 3.0;
        let fine = *shoot(&x, &controls, t, &p, 400).last().unwrap();
        let err = |m| {
            let e = *shoot(&x, &controls, t, &p, m).last().unwrap();
            e.to_array()
                .iter()
                .zip(fine.to_array())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(4) / err(8);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
        assert!(err(1) > err(100));
    }

    #[test]
    fn reversing_jackknifes_open_loop() {
        let p = VehicleParams::default();
        let mut x = State::new(0.0, 0.0, 0.0, 0.05);
        let u = Control::new(-0.3, 0.0);
        let mut last = beta01(&x).abs();
        for _ in 0..1000 {
            x = rk4_step(&x, &u, &u, 0.01, &p);
            let b = beta01(&x).abs();
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn unwrapping_preserves_articulation() {
        let x = State::new(0.0, 0.0, 7.0, 7.0 - 0.4);
        let y = x.unwrapped_near(0.0);
        assert_abs_diff_eq!(y.theta1, 7.0 - 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(beta01(&y), -0.4, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn ode_is_se2_equivariant(
            x in -5.0f64..5.0, y in -5.0f64..5.0, t1 in -3.0f64..3.0, beta in -1.2f64..1.2,
            v in -0.5f64..0.5, w in -1.5f64..1.5, rot in -3.0f64..3.0,
        ) {
            let p = VehicleParams::default();
            let s = State::new(x, y, t1, t1 + beta);
            let u = Control::new(v, w);
            let (c, sn) = (rot.cos(), rot.sin());
            let moved = State::new(c * x - sn * y, sn * x + c * y, t1 + rot, t1 + beta + rot);
            let d = ode(&s, &u, &p);
            let dm = ode(&moved, &u, &p);
            prop_assert!((dm.px1 - (c * d.px1 - sn * d.py1)).abs() < 1e-12);
            prop_assert!((dm.py1 - (sn * d.px1 + c * d.py1)).abs() < 1e-12);
            prop_assert!((dm.theta1 - d.theta1).abs() < 1e-12);
            prop_assert!((dm.theta0 - d.theta0).abs() < 1e-12);
        }

        #[test]
        fn beta_in_half_open_interval(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let v = beta01(&State::new(0.0, 0.0, a, b));
            prop_assert!(v > -PI && v <= PI);
        }
    }
}
