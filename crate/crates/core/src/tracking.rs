//! Cascaded tracking feedback: trailer errors in the trajectory frame give
//! trailer velocity corrections, which become a desired hitch velocity and
//! then a truck control correction added to the feedforward.

use crate::trajectory::TimedTrajectory;
use crate::vehicle::{trailer_speed, wrap_angle, Control, State, VehicleParams};

/// Gain per m/s of reference speed, one slope per driving direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slopes {
    pub forward: f64,
    pub backward: f64,
}

impl Slopes {
    pub const fn new(forward: f64, backward: f64) -> Self {
        Self { forward, backward }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule {
    pub kx: Slopes,
    pub ky: Slopes,
    pub ktheta: Slopes,
    /// Truck heading alignment gain [1/s].
    pub k_omega0: f64,
    /// Half-width of the speed band without feedback [m/s].
    pub v_dz: f64,
}

impl Default for GainSchedule {
    fn default() -> Self {
        Self {
            kx: Slopes::new(1.0, 1.0),
            ky: Slopes::new(3.0, 3.0),
            ktheta: Slopes::new(1.5, 4.0),
            k_omega0: 2.0,
            v_dz: 0.02,
        }
    }
}

impl GainSchedule {
    pub fn validate(&self) -> Result<(), crate::CoreError> {
        let slopes = [self.kx, self.ky, self.ktheta];
        let ok = slopes.iter().all(|s| s.forward >= 0.0 && s.backward >= 0.0)
            && self.k_omega0 >= 0.0
            && self.v_dz > 0.0
            && self.v_dz.is_finite();
        if ok {
            Ok(())
        } else {
            Err(crate::CoreError::InvalidParams(
                "gain slopes and the heading gain must be nonnegative, the dead zone positive"
                    .into(),
            ))
        }
    }

    fn gain(&self, s: Slopes, v_ref: f64) -> f64 {
        if v_ref.abs() < self.v_dz {
            0.0
        } else if v_ref > 0.0 {
            s.forward * v_ref.abs()
        } else {
            s.backward * v_ref.abs()
        }
    }

    /// `(Kx1, Ky1, Kθ1)` at reference speed `v_ref`.
    pub fn gains(&self, v_ref: f64) -> (f64, f64, f64) {
        (
            self.gain(self.kx, v_ref),
            self.gain(self.ky, v_ref),
            self.gain(self.ktheta, v_ref),
        )
    }
}

/// Trailer error along and across the reference motion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    pub dpx1: f64,
    pub dpy1: f64,
    pub dtheta1: f64,
}

/// Direction of the trajectory frame x-axis: the reference trailer velocity,
/// or the reference heading when the reference barely moves.
fn frame_angle(x_ref: &State, v1_ref: f64, v_dz: f64) -> f64 {
    if v1_ref < -v_dz {
        x_ref.theta1 + std::f64::consts::PI
    } else {
        x_ref.theta1
    }
}

/// Error of `x_meas` against a reference state moving at trailer speed
/// `v1_ref`.
pub fn frame_error(x_meas: &State, x_ref: &State, v1_ref: f64, v_dz: f64) -> TrackingError {
    let phi = frame_angle(x_ref, v1_ref, v_dz);
    let (s, c) = phi.sin_cos();
    let ex = x_meas.px1 - x_ref.px1;
    let ey = x_meas.py1 - x_ref.py1;
    TrackingError {
        dpx1: c * ex + s * ey,
        dpy1: -s * ex + c * ey,
        dtheta1: wrap_angle(x_meas.theta1 - x_ref.theta1),
    }
}

pub fn trajectory_frame_error(
    x_meas: &State,
    reference: &TimedTrajectory,
    t: f64,
    p: &VehicleParams,
    v_dz: f64,
) -> TrackingError {
    let (x_ref, u_ref) = reference.sample(t);
    frame_error(x_meas, &x_ref, trailer_speed(&x_ref, &u_ref, p), v_dz)
}

/// `(δv1, δω1)`; `δv1` acts along the trajectory frame x-axis.
pub fn trailer_feedback(e: &TrackingError, v_ref: f64, g: &GainSchedule) -> (f64, f64) {
    let (kx, ky, kt) = g.gains(v_ref);
    (-kx * e.dpx1, -ky * e.dpy1 - kt * e.dtheta1)
}

/// Truck control correction for the trailer corrections.
///
/// The desired hitch velocity change is `δv1` along the trailer motion plus
/// `δω1 L1` across the trailer. `δv0` is its projection on the truck heading;
/// `δω0` turns the truck from its current velocity direction toward the
/// feedforward velocity (at the reference truck heading) plus the change.
#[allow(clippy::too_many_arguments)]
pub fn trailer_to_truck(
    dv1: f64,
    domega1: f64,
    x: &State,
    x_ref: &State,
    v1_ref: f64,
    p: &VehicleParams,
    u_ff: &Control,
    g: &GainSchedule,
) -> Control {
    let along = if v1_ref < -g.v_dz { -1.0 } else { 1.0 };
    let (s1, c1) = x.theta1.sin_cos();
    let dvec = [
        along * dv1 * c1 - domega1 * p.l1 * s1,
        along * dv1 * s1 + domega1 * p.l1 * c1,
    ];
    let (s0, c0) = x.theta0.sin_cos();
    let dv0 = dvec[0] * c0 + dvec[1] * s0;

    let current = [u_ff.v0 * c0, u_ff.v0 * s0];
    let (sr, cr) = x_ref.theta0.sin_cos();
    let desired = [u_ff.v0 * cr + dvec[0], u_ff.v0 * sr + dvec[1]];
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    let domega0 = if norm(current) < g.v_dz || norm(desired) < g.v_dz {
        0.0
    } else {
        let cross = current[0] * desired[1] - current[1] * desired[0];
        let dot = current[0] * desired[0] + current[1] * desired[1];
        g.k_omega0 * cross.atan2(dot)
    };
    Control::new(dv0, domega0)
}

/// Applied control (feedforward plus correction, saturated) and the
/// trajectory frame error at time `t`.
pub fn control_correction(
    x_meas: &State,
    reference: &TimedTrajectory,
    t: f64,
    p: &VehicleParams,
    g: &GainSchedule,
) -> (Control, TrackingError) {
    let (x_ref, u_ff) = reference.sample(t);
    let v1_ref = trailer_speed(&x_ref, &u_ff, p);
    let e = frame_error(x_meas, &x_ref, v1_ref, g.v_dz);
    if v1_ref.abs() < g.v_dz {
        return (u_ff.clamp(&p.u_min, &p.u_max), e);
    }
    let (dv1, dw1) = trailer_feedback(&e, v1_ref, g);
    let du = trailer_to_truck(dv1, dw1, x_meas, &x_ref, v1_ref, p, &u_ff, g);
    let applied = Control::new(u_ff.v0 + du.v0, u_ff.omega0 + du.omega0);
    (applied.clamp(&p.u_min, &p.u_max), e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Knot;
    use crate::vehicle::rk4_step;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn straight(v0: f64, duration: f64) -> TimedTrajectory {
        let n = (duration / 0.01).round() as usize;
        let knots = (0..=n)
            .map(|i| {
                let t = i as f64 * 0.01;
                Knot {
                    t,
                    x: State::new(v0 * t, 0.0, 0.0, 0.0),
                    u: Control::new(v0, 0.0),
                    tag: 0,
                }
            })
            .collect();
        TimedTrajectory::new(knots).unwrap()
    }

    #[test]
    fn frame_error_examples() {
        let r = State::default();
        let e = frame_error(&r, &r, 0.5, 0.02);
        assert_eq!(e, TrackingError::default());

        let e = frame_error(&State::new(0.0, 0.1, 0.0, 0.0), &r, 0.5, 0.02);
        assert_abs_diff_eq!(e.dpy1, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(e.dpx1, 0.0, epsilon = 1e-15);

        // rotate the world error by -π/2
        let r = State::new(0.0, 0.0, FRAC_PI_2, FRAC_PI_2);
        let e = frame_error(&State::new(0.1, 0.0, FRAC_PI_2, FRAC_PI_2), &r, 0.5, 0.02);
        assert_abs_diff_eq!(e.dpx1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.dpy1, -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(e.dtheta1, 0.0);
    }

    #[test]
    fn reversing_flips_the_frame() {
        let r = State::default();
        let e = frame_error(&State::new(-0.1, 0.1, 0.0, 0.0), &r, -0.3, 0.02);
        assert_abs_diff_eq!(e.dpx1, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(e.dpy1, -0.1, epsilon = 1e-15);
        // standstill falls back to the heading
        let e = frame_error(&State::new(-0.1, 0.1, 0.0, 0.0), &r, -0.01, 0.02);
        assert_abs_diff_eq!(e.dpx1, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn trailer_feedback_examples() {
        let g = GainSchedule {
            ky: Slopes::new(2.0, 2.0),
            ..Default::default()
        };
        assert_eq!(
            trailer_feedback(&TrackingError::default(), 0.5, &g),
            (0.0, 0.0)
        );
        let e = TrackingError {
            dpx1: 0.3,
            dpy1: 0.1,
            dtheta1: 0.2,
        };
        assert_eq!(trailer_feedback(&e, 0.01, &g), (0.0, 0.0));
        let (_, dw) = trailer_feedback(
            &TrackingError {
                dpy1: 0.1,
                ..Default::default()
            },
            0.5,
            &g,
        );
        assert_abs_diff_eq!(dw, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn trailer_to_truck_examples() {
        let p = VehicleParams::default();
        let g = GainSchedule::default();
        let x = State::default();
        let ff = Control::new(0.5, 0.0);
        assert_eq!(
            trailer_to_truck(0.0, 0.0, &x, &x, 0.5, &p, &ff, &g),
            Control::new(0.0, 0.0)
        );

        let du = trailer_to_truck(0.1, 0.0, &x, &x, 0.5, &p, &ff, &g);
        assert_abs_diff_eq!(du.v0, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(du.omega0, 0.0, epsilon = 1e-15);

        let du = trailer_to_truck(0.0, 0.1, &x, &x, 0.5, &p, &ff, &g);
        assert_abs_diff_eq!(du.v0, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(du.omega0, g.k_omega0 * 0.06f64.atan2(0.5), epsilon = 1e-14);
    }

    #[test]
    fn on_reference_applies_the_feedforward() {
        let p = VehicleParams::default();
        let g = GainSchedule::default();
        let tr = straight(-0.3, 2.0);
        let (x, u) = tr.sample(0.73);
        let (applied, e) = control_correction(&x, &tr, 0.73, &p, &g);
        assert_eq!(applied, u);
        assert_eq!(e, TrackingError::default());
    }

    #[test]
    fn reverse_closed_loop_settles() {
        let p = VehicleParams::default();
        let g = GainSchedule::default();
        let tr = straight(-0.3, 30.0);
        let mut x = State::new(0.0, 0.05, 0.05, 0.10);
        let dt = 0.01;
        let mut worst_late = 0.0_f64;
        for i in 0..3000 {
            let t = i as f64 * dt;
            let (u, e) = control_correction(&x, &tr, t, &p, &g);
            if t >= 15.0 {
                worst_late = worst_late.max(e.dpy1.hypot(e.dtheta1));
            }
            x = rk4_step(&x, &u, &u, dt, &p);
        }
        assert!(worst_late < 0.01, "{worst_late}");
    }

    proptest! {
        #[test]
        fn applied_control_is_saturated(
            dx in -5.0f64..5.0, dy in -5.0f64..5.0, dth in -3.0f64..3.0, db in -1.0f64..1.0,
            t in 0.0f64..3.0, v in prop_oneof![Just(0.5), Just(-0.5), Just(0.3)],
        ) {
            let p = VehicleParams::default();
            let g = GainSchedule::default();
            let tr = straight(v, 3.0);
            let r = tr.state(t);
            let x = State::new(r.px1 + dx, r.py1 + dy, r.theta1 + dth, r.theta1 + dth + db);
            let (u, _) = control_correction(&x, &tr, t, &p, &g);
            prop_assert!(u.v0 >= p.u_min.v0 && u.v0 <= p.u_max.v0);
            prop_assert!(u.omega0 >= p.u_min.omega0 && u.omega0 <= p.u_max.omega0);
        }

        #[test]
        fn dead_zone_returns_the_feedforward(dx in -1.0f64..1.0, dy in -1.0f64..1.0, dth in -1.0f64..1.0) {
            let p = VehicleParams::default();
            let g = GainSchedule::default();
            let tr = straight(0.01, 3.0);
            let r = tr.state(1.0);
            let x = State::new(r.px1 + dx, r.py1 + dy, dth, dth);
            let (u, _) = control_correction(&x, &tr, 1.0, &p, &g);
            prop_assert_eq!(u, Control::new(0.01, 0.0));
        }
    }
}
