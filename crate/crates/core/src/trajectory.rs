//! Timed reference trajectories and stitching.

use crate::ocp::MultiStageSolution;
use crate::vehicle::{integrate_interval_dual, Control, State, VehicleParams};
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub x: State,
    pub u: Control,
    /// Route pair the knot was planned for.
    pub tag: usize,
}

/// Knots with strictly increasing times, interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    knots: Vec<Knot>,
}

impl TimedTrajectory {
    pub fn new(knots: Vec<Knot>) -> Result<Self, CoreError> {
        if knots.is_empty() {
            return Err(CoreError::InvalidTrajectory("no knots".into()));
        }
        for k in &knots {
            if !(k.t.is_finite() && k.x.is_finite() && k.u.v0.is_finite() && k.u.omega0.is_finite())
            {
                return Err(CoreError::InvalidTrajectory(format!(
                    "non-finite knot at t = {}",
                    k.t
                )));
            }
        }
        if let Some(w) = knots.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(CoreError::InvalidTrajectory(format!(
                "knot times must increase strictly ({} then {})",
                w[0].t, w[1].t
            )));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn start(&self) -> f64 {
        self.knots[0].t
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].t
    }

    pub fn terminal_state(&self) -> State {
        self.knots[self.knots.len() - 1].x
    }

    /// Index `i` with `knots[i].t <= t < knots[i + 1].t`, for `t` inside the
    /// domain.
    fn segment(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|k| k.t <= t);
        i.saturating_sub(1).min(self.knots.len().saturating_sub(2))
    }

    /// State and control at `t`. Before the start the first knot is held;
    /// past the end the terminal state is returned with zero control.
    pub fn sample(&self, t: f64) -> (State, Control) {
        let first = &self.knots[0];
        if t <= first.t {
            return (first.x, first.u);
        }
        if t > self.end() {
            return (self.terminal_state(), Control::ZERO);
        }
        if self.knots.len() == 1 {
            return (first.x, first.u);
        }
        let i = self.segment(t);
        let (a, b) = (&self.knots[i], &self.knots[i + 1]);
        let s = (t - a.t) / (b.t - a.t);
        (a.x.lerp(&b.x, s), a.u.lerp(&b.u, s))
    }

    pub fn state(&self, t: f64) -> State {
        self.sample(t).0
    }

    /// Pair tag of the segment containing `t` (clamped to the domain).
    pub fn tag_at(&self, t: f64) -> usize {
        if t <= self.start() {
            return self.knots[0].tag;
        }
        if t >= self.end() {
            return self.knots[self.knots.len() - 1].tag;
        }
        self.knots[self.segment(t)].tag
    }

    pub fn shifted(&self, dt: f64) -> Result<TimedTrajectory, CoreError> {
        TimedTrajectory::new(
            self.knots
                .iter()
                .map(|k| Knot { t: k.t + dt, ..*k })
                .collect(),
        )
    }

    /// `self` on `t < t_s` followed by `next` from `t_s` on. `next` must
    /// start at `t_s`.
    pub fn stitch(&self, t_s: f64, next: &TimedTrajectory) -> Result<TimedTrajectory, CoreError> {
        if (next.start() - t_s).abs() > 1e-9 {
            return Err(CoreError::InvalidTrajectory(format!(
                "stitched trajectory starts at {} instead of {t_s}",
                next.start()
            )));
        }
        let mut knots: Vec<Knot> = self.knots.iter().copied().filter(|k| k.t < t_s).collect();
        knots.extend_from_slice(&next.knots);
        TimedTrajectory::new(knots)
    }

    /// Resamples a solution by integrating every shooting interval from its
    /// node state in steps of at most `max_dt`. The solution clock starts at
    /// `t0` and the first knot is set exactly to `x0`.
    pub fn from_solution(
        sol: &MultiStageSolution,
        x0: &State,
        t0: f64,
        max_dt: f64,
        p: &VehicleParams,
        tag: usize,
    ) -> Result<Self, CoreError> {
        let mut knots = Vec::new();
        let mut t_stage = t0;
        for (j, stage) in sol.stages.iter().enumerate() {
            let n = stage.intervals();
            let dt = stage.dt();
            let sub = ((dt / max_dt).ceil() as usize).max(1);
            let h = dt / sub as f64;
            for k in 0..n {
                let (ua, ub) = (stage.controls[k], stage.controls[k + 1]);
                let mut x = if j == 0 && k == 0 {
                    x0.to_array()
                } else {
                    stage.states[k].to_array()
                };
                let t_node = t_stage + k as f64 * dt;
                for i in 0..sub {
                    let s = i as f64 / sub as f64;
                    knots.push(Knot {
                        t: t_node + i as f64 * h,
                        x: State::from_array(x),
                        u: ua.lerp(&ub, s),
                        tag,
                    });
                    let u_lo = ua.lerp(&ub, s).to_array();
                    let u_hi = ua.lerp(&ub, (i + 1) as f64 / sub as f64).to_array();
                    x = integrate_interval_dual(&x, &u_lo, &u_hi, &h, 1, p.l1, p.m0);
                }
            }
            t_stage += stage.t;
        }
        let last = sol.stages.last().expect("three stages");
        knots.push(Knot {
            t: t_stage,
            x: *last.states.last().expect("nodes"),
            u: *last.controls.last().expect("nodes"),
            tag,
        });
        // stage boundaries may coincide within rounding
        knots.dedup_by(|b, a| b.t <= a.t);
        TimedTrajectory::new(knots)
    }
}

/// Largest componentwise state difference between `old` and `new` at `t`.
pub fn stitch_jump(old: &TimedTrajectory, new: &TimedTrajectory, t: f64) -> f64 {
    let a = old.state(t).to_array();
    let b = new.state(t).to_array();
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(t0: f64, t1: f64, n: usize, tag: usize) -> TimedTrajectory {
        let knots = (0..=n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / n as f64;
                Knot {
                    t,
                    x: State::new(t, 0.0, 0.0, 0.0),
                    u: Control::new(1.0, 0.0),
                    tag,
                }
            })
            .collect();
        TimedTrajectory::new(knots).unwrap()
    }

    #[test]
    fn rejects_non_increasing_times() {
        let k = Knot {
            t: 0.0,
            x: State::default(),
            u: Control::ZERO,
            tag: 0,
        };
        assert!(TimedTrajectory::new(vec![k, k]).is_err());
        assert!(TimedTrajectory::new(vec![]).is_err());
    }

    #[test]
    fn interpolates_and_holds_the_end() {
        let tr = line(0.0, 2.0, 4, 0);
        let (x, u) = tr.sample(0.75);
        assert!((x.px1 - 0.75).abs() < 1e-12);
        assert_eq!(u, Control::new(1.0, 0.0));
        let (x, u) = tr.sample(5.0);
        assert_eq!(x.px1, 2.0);
        assert_eq!(u, Control::ZERO);
    }

    #[test]
    fn stitch_takes_the_new_trajectory_from_the_stitch_time() {
        let old = line(0.0, 4.0, 8, 0);
        let mut knots = line(1.0, 3.0, 4, 1).knots().to_vec();
        for k in &mut knots {
            k.x.py1 = k.t - 1.0;
        }
        let new = TimedTrajectory::new(knots).unwrap();
        let st = old.stitch(1.0, &new).unwrap();
        assert_eq!(st.start(), 0.0);
        assert_eq!(st.end(), 3.0);
        assert_eq!(st.tag_at(0.5), 0);
        assert_eq!(st.tag_at(2.0), 1);
        assert_eq!(stitch_jump(&old, &st, 1.0), 0.0);
        assert!((st.state(2.0).py1 - 1.0).abs() < 1e-12);
        assert!(old.stitch(1.5, &new).is_err());
    }

    proptest! {
        #[test]
        fn stitching_keeps_times_increasing(split in 0.01f64..3.99) {
            let old = line(0.0, 4.0, 40, 0);
            let x = old.state(split);
            let knots = (0..10)
                .map(|i| Knot { t: split + 0.1 * i as f64, x, u: Control::ZERO, tag: 1 })
                .collect();
            let new = TimedTrajectory::new(knots).unwrap();
            let st = old.stitch(split, &new).unwrap();
            prop_assert!(st.knots().windows(2).all(|w| w[0].t < w[1].t));
            prop_assert_eq!(stitch_jump(&old, &st, split), 0.0);
        }
    }
}
