//! Contact schedules and swing references.
//!
//! A gait timeline maps user commands (stance / crawl / trot) to per-EE
//! contact flags over time. Periodic patterns are anchored at the absolute
//! activation time of the command, so rebuilding the schedule window at a
//! later query time reproduces the same flags.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("unknown gait '{0}'")]
    UnknownGait(String),
    #[error("schedule window [{start:.3}, {end:.3}] does not cover time {t:.3}")]
    Gap { t: f64, start: f64, end: f64 },
    #[error("leg {leg} is in stance at time {t:.3}; swing reference undefined")]
    NotSwinging { leg: usize, t: f64 },
    #[error("horizon must be positive (got {0})")]
    BadHorizon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gait {
    Stance,
    Crawl,
    Trot,
}

impl Gait {
    pub fn parse(name: &str) -> Result<Self, GaitError> {
        match name {
            "stance" => Ok(Self::Stance),
            "crawl" => Ok(Self::Crawl),
            "trot" => Ok(Self::Trot),
            other => Err(GaitError::UnknownGait(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Stance => "stance",
            Self::Crawl => "crawl",
            Self::Trot => "trot",
        }
    }
}

/// Gait timing and swing-curve parameters.
#[derive(Debug, Clone)]
pub struct GaitParams {
    /// Swing phase duration [s].
    pub swing_duration: f64,
    /// Full-stance interval between swings [s].
    pub stance_interleave: f64,
    /// Swing apex height above ground [m].
    pub apex_height: f64,
    /// Ground height [m].
    pub ground_height: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            swing_duration: 0.3,
            stance_interleave: 0.3,
            apex_height: 0.08,
            ground_height: 0.0,
        }
    }
}

/// One gait command active from `start` until the next command.
#[derive(Debug, Clone)]
pub struct GaitCommand {
    pub start: f64,
    pub gait: Gait,
    pub params: GaitParams,
    /// Closed arm contacts while this command is active (per arm EE).
    pub arm_contact: Vec<bool>,
}

impl GaitCommand {
    pub fn new(start: f64, gait: Gait) -> Self {
        Self {
            start,
            gait,
            params: GaitParams::default(),
            arm_contact: Vec::new(),
        }
    }
}

// Trot leg pairs and crawl cycling order over leg EE indices (FL, FR, RL, RR).
const TROT_PAIR_A: [usize; 2] = [0, 3];
const TROT_PAIR_B: [usize; 2] = [1, 2];
const CRAWL_ORDER: [usize; 4] = [0, 3, 1, 2];

/// Sequence of gait commands; all-leg stance before the first command.
#[derive(Debug, Clone)]
pub struct GaitTimeline {
    commands: Vec<GaitCommand>,
    n_legs: usize,
    n_arms: usize,
}

/// Swing interval of one leg plus curve data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingWindow {
    pub start: f64,
    pub end: f64,
    pub apex_height: f64,
    pub ground_height: f64,
}

impl GaitTimeline {
    pub fn stance(n_legs: usize, n_arms: usize) -> Self {
        Self {
            commands: vec![GaitCommand::new(0.0, Gait::Stance)],
            n_legs,
            n_arms,
        }
    }

    pub fn new(mut commands: Vec<GaitCommand>, n_legs: usize, n_arms: usize) -> Self {
        commands.sort_by(|a, b| a.start.total_cmp(&b.start));
        Self {
            commands,
            n_legs,
            n_arms,
        }
    }

    pub fn n_ee(&self) -> usize {
        self.n_legs + self.n_arms
    }

    fn command_index_at(&self, t: f64) -> Option<usize> {
        self.commands.iter().rposition(|c| t >= c.start)
    }

    /// Contact flags at absolute time `t` (legs first, then arms).
    pub fn flags_at(&self, t: f64) -> Vec<bool> {
        let mut flags = vec![true; self.n_ee()];
        for a in 0..self.n_arms {
            flags[self.n_legs + a] = false;
        }
        let Some(ci) = self.command_index_at(t) else {
            return flags;
        };
        let cmd = &self.commands[ci];
        for (a, closed) in cmd.arm_contact.iter().enumerate().take(self.n_arms) {
            flags[self.n_legs + a] = *closed;
        }
        let tau = t - cmd.start;
        match cmd.gait {
            Gait::Stance => {}
            Gait::Trot => {
                let sw = cmd.params.swing_duration;
                let st = cmd.params.stance_interleave;
                let phase = tau.rem_euclid(2.0 * (sw + st));
                let swinging: Option<&[usize; 2]> = if phase < sw {
                    Some(&TROT_PAIR_A)
                } else if phase >= sw + st && phase < 2.0 * sw + st {
                    Some(&TROT_PAIR_B)
                } else {
                    None
                };
                if let Some(pair) = swinging {
                    for &leg in pair {
                        if leg < self.n_legs {
                            flags[leg] = false;
                        }
                    }
                }
            }
            Gait::Crawl => {
                let sw = cmd.params.swing_duration;
                let st = cmd.params.stance_interleave;
                let slot = sw + st;
                let phase = tau.rem_euclid(4.0 * slot);
                let k = (phase / slot).floor() as usize % 4;
                if phase - k as f64 * slot < sw {
                    let leg = CRAWL_ORDER[k];
                    if leg < self.n_legs {
                        flags[leg] = false;
                    }
                }
            }
        }
        flags
    }

    /// The swing window containing `t` for a leg, if the leg is swinging.
    pub fn swing_window(&self, leg: usize, t: f64) -> Option<SwingWindow> {
        let ci = self.command_index_at(t)?;
        let cmd = &self.commands[ci];
        let cmd_end = self
            .commands
            .get(ci + 1)
            .map(|c| c.start)
            .unwrap_or(f64::INFINITY);
        let tau = t - cmd.start;
        let sw = cmd.params.swing_duration;
        let st = cmd.params.stance_interleave;
        let local_start = match cmd.gait {
            Gait::Stance => return None,
            Gait::Trot => {
                let period = 2.0 * (sw + st);
                let phase = tau.rem_euclid(period);
                let cycle = tau - phase;
                if TROT_PAIR_A.contains(&leg) && phase < sw {
                    cycle
                } else if TROT_PAIR_B.contains(&leg) && (sw + st..2.0 * sw + st).contains(&phase) {
                    cycle + sw + st
                } else {
                    return None;
                }
            }
            Gait::Crawl => {
                let slot = sw + st;
                let phase = tau.rem_euclid(4.0 * slot);
                let cycle = tau - phase;
                let k = (phase / slot).floor() as usize % 4;
                if CRAWL_ORDER[k] == leg && phase - k as f64 * slot < sw {
                    cycle + k as f64 * slot
                } else {
                    return None;
                }
            }
        };
        let start = cmd.start + local_start;
        // A command switch mid-swing ends the swing early.
        let end = (start + sw).min(cmd_end);
        Some(SwingWindow {
            start,
            end,
            apex_height: cmd.params.apex_height,
            ground_height: cmd.params.ground_height,
        })
    }
}

/// Contiguous contact phase.
#[derive(Debug, Clone)]
pub struct Phase {
    pub start: f64,
    pub end: f64,
    pub flags: Vec<bool>,
}

/// Contact schedule materialized over `[t0, t0 + horizon]`, with swing
/// reference evaluation.
#[derive(Debug, Clone)]
pub struct ContactSchedule {
    timeline: GaitTimeline,
    phases: Vec<Phase>,
    start: f64,
    end: f64,
}

/// Build the schedule window for a gait timeline.
pub fn build_contact_schedule(
    timeline: &GaitTimeline,
    t0: f64,
    horizon: f64,
) -> Result<ContactSchedule, GaitError> {
    if horizon <= 0.0 {
        return Err(GaitError::BadHorizon(horizon));
    }
    let end = t0 + horizon;
    // Scan for flag changes on a fine grid, refining each transition by
    // bisection so phase boundaries are sharp.
    let mut phases = Vec::new();
    let scan_dt = 1e-3;
    let mut phase_start = t0;
    let mut flags = timeline.flags_at(t0);
    let mut t = t0;
    while t < end {
        let t_next = (t + scan_dt).min(end);
        let next_flags = timeline.flags_at(t_next);
        if next_flags != flags {
            let mut lo = t;
            let mut hi = t_next;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if timeline.flags_at(mid) == flags {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            phases.push(Phase {
                start: phase_start,
                end: hi,
                flags: flags.clone(),
            });
            phase_start = hi;
            flags = next_flags;
        }
        t = t_next;
    }
    phases.push(Phase {
        start: phase_start,
        end,
        flags,
    });
    Ok(ContactSchedule {
        timeline: timeline.clone(),
        phases,
        start: t0,
        end,
    })
}

/// Convenience builder for a single-gait schedule anchored at `t0`.
pub fn single_gait_schedule(
    gait: Gait,
    t0: f64,
    horizon: f64,
    params: GaitParams,
    n_legs: usize,
    n_arms: usize,
) -> Result<ContactSchedule, GaitError> {
    let mut cmd = GaitCommand::new(t0, gait);
    cmd.params = params;
    let timeline = GaitTimeline::new(vec![cmd], n_legs, n_arms);
    build_contact_schedule(&timeline, t0, horizon)
}

impl ContactSchedule {
    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn window(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn n_legs(&self) -> usize {
        self.timeline.n_legs
    }

    pub fn timeline(&self) -> &GaitTimeline {
        &self.timeline
    }

    fn check_covered(&self, t: f64) -> Result<(), GaitError> {
        let eps = 1e-9;
        if t < self.start - eps || t > self.end + eps {
            return Err(GaitError::Gap {
                t,
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    /// Contact flags at `t` (must lie within the window).
    pub fn contact_flags(&self, t: f64) -> Result<Vec<bool>, GaitError> {
        self.check_covered(t)?;
        Ok(self.timeline.flags_at(t))
    }

    pub fn is_contact(&self, ee: usize, t: f64) -> Result<bool, GaitError> {
        Ok(self.contact_flags(t)?[ee])
    }

    /// Swing reference (normal position, normal velocity) for a swinging
    /// leg: two cubic segments lifting to the apex at mid-swing and
    /// returning to ground height with zero end velocity.
    pub fn swing_reference(&self, leg: usize, t: f64) -> Result<(f64, f64), GaitError> {
        self.check_covered(t)?;
        let window = self
            .timeline
            .swing_window(leg, t)
            .ok_or(GaitError::NotSwinging { leg, t })?;
        Ok(swing_curve(&window, t))
    }

    pub fn swing_window(&self, leg: usize, t: f64) -> Option<SwingWindow> {
        self.timeline.swing_window(leg, t)
    }
}

/// Evaluate the two-cubic swing profile at time `t` within the window.
pub fn swing_curve(window: &SwingWindow, t: f64) -> (f64, f64) {
    let duration = window.end - window.start;
    let half = 0.5 * duration;
    let g = window.ground_height;
    let h = window.apex_height;
    let tau = (t - window.start).clamp(0.0, duration);
    // Smoothstep cubic on each half: zero end-point velocities, apex at
    // mid-swing.
    let (s, sign, offset) = if tau < half {
        (tau / half, 1.0, g)
    } else {
        ((tau - half) / half, -1.0, g + h)
    };
    let blend = s * s * (3.0 - 2.0 * s);
    let dblend = 6.0 * s * (1.0 - s) / half;
    let p = offset + sign * h * blend;
    let v = sign * h * dblend;
    (p, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trot_timeline() -> GaitTimeline {
        GaitTimeline::new(vec![GaitCommand::new(0.0, Gait::Trot)], 4, 2)
    }

    #[test]
    fn stance_single_phase_all_closed() {
        let timeline = GaitTimeline::stance(4, 2);
        let sched = build_contact_schedule(&timeline, 0.0, 1.0).unwrap();
        assert_eq!(sched.phases().len(), 1);
        let flags = sched.contact_flags(0.5).unwrap();
        assert_eq!(&flags[0..4], &[true; 4]);
        assert_eq!(&flags[4..6], &[false; 2]);
    }

    #[test]
    fn trot_alternates_diagonal_pairs() {
        let sched = build_contact_schedule(&trot_timeline(), 0.0, 1.2).unwrap();
        let at = |t: f64| sched.contact_flags(t).unwrap();
        // First swing: FL + RR open.
        assert_eq!(&at(0.15)[0..4], &[false, true, true, false]);
        // Interleave: all closed.
        assert_eq!(&at(0.45)[0..4], &[true; 4]);
        // Second swing: FR + RL open.
        assert_eq!(&at(0.75)[0..4], &[true, false, false, true]);
    }

    #[test]
    fn crawl_at_most_one_leg_open() {
        let timeline = GaitTimeline::new(vec![GaitCommand::new(0.0, Gait::Crawl)], 4, 2);
        let sched = build_contact_schedule(&timeline, 0.0, 2.4).unwrap();
        for phase in sched.phases() {
            let open = phase.flags[0..4].iter().filter(|f| !**f).count();
            assert!(open <= 1, "phase {phase:?} opens more than one leg");
        }
        // Cycling order FL, RR, FR, RL.
        assert!(!sched.contact_flags(0.1).unwrap()[0]);
        assert!(!sched.contact_flags(0.7).unwrap()[3]);
        assert!(!sched.contact_flags(1.3).unwrap()[1]);
        assert!(!sched.contact_flags(1.9).unwrap()[2]);
    }

    #[test]
    fn phases_are_contiguous_and_cover_window() {
        let sched = build_contact_schedule(&trot_timeline(), 0.13, 1.0).unwrap();
        let phases = sched.phases();
        assert!((phases[0].start - 0.13).abs() < 1e-12);
        assert!((phases.last().unwrap().end - 1.13).abs() < 1e-12);
        for pair in phases.windows(2) {
            assert!((pair[0].end - pair[1].start).abs() < 1e-12);
            assert!(pair[0].end > pair[0].start);
        }
    }

    #[test]
    fn schedule_is_time_translation_consistent() {
        let timeline = trot_timeline();
        let a = build_contact_schedule(&timeline, 0.0, 1.0).unwrap();
        let b = build_contact_schedule(&timeline, 0.4, 1.0).unwrap();
        for t in [0.45, 0.6, 0.85, 0.99] {
            assert_eq!(a.contact_flags(t).unwrap(), b.contact_flags(t).unwrap());
        }
    }

    #[test]
    fn swing_reference_boundary_and_apex() {
        let sched = build_contact_schedule(&trot_timeline(), 0.0, 1.0).unwrap();
        let (p0, v0) = sched.swing_reference(0, 1e-12).unwrap();
        assert!((p0 - 0.0).abs() < 1e-9 && v0.abs() < 1e-6);
        let (pm, vm) = sched.swing_reference(0, 0.15).unwrap();
        assert!((pm - 0.08).abs() < 1e-12, "apex {pm}");
        assert!(vm.abs() < 1e-12);
        let (pe, ve) = sched.swing_reference(0, 0.3 - 1e-12).unwrap();
        assert!((pe - 0.0).abs() < 1e-9 && ve.abs() < 1e-6);
    }

    #[test]
    fn swing_velocity_matches_position_derivative() {
        let sched = build_contact_schedule(&trot_timeline(), 0.0, 1.0).unwrap();
        let h = 1e-7;
        let mut t = 0.01;
        while t < 0.29 {
            let (_, v) = sched.swing_reference(0, t).unwrap();
            let (pp, _) = sched.swing_reference(0, t + h).unwrap();
            let (pm, _) = sched.swing_reference(0, t - h).unwrap();
            let fd = (pp - pm) / (2.0 * h);
            assert!((v - fd).abs() < 1e-6, "t={t}: v={v}, fd={fd}");
            t += 0.017;
        }
    }

    #[test]
    fn stance_query_errors() {
        let sched = build_contact_schedule(&trot_timeline(), 0.0, 1.0).unwrap();
        assert!(matches!(
            sched.swing_reference(1, 0.1),
            Err(GaitError::NotSwinging { .. })
        ));
        assert!(matches!(
            sched.contact_flags(5.0),
            Err(GaitError::Gap { .. })
        ));
    }

    #[test]
    fn unknown_gait_name_rejected() {
        assert!(matches!(
            Gait::parse("gallop"),
            Err(GaitError::UnknownGait(_))
        ));
    }
}
