//! Synthetic match generator: rule-based, fully labeled soccer-like clips.
//!
//! Real broadcast tracking data cannot ship with a library, so training and
//! evaluation run on sequences from this module. The generator is not a
//! physics engine; it is the smallest event machine whose outputs satisfy
//! the label contracts exactly: during possession the ball stays glued to
//! the possessor, passes fly straight at constant speed toward an
//! interception point, loose balls decelerate under constant friction until
//! the nearest player recovers them, and the possessor label always names
//! the last toucher.
//!
//! Everything is a pure function of `(params, sequence id)`: player motion
//! and event choices draw from one derived RNG stream, crop features from
//! another, so datasets regenerate bitwise-identically and crop features can
//! be re-simulated for a stored sequence without re-running the match.
//! Coordinates pass through f32 before leaving this module, matching the
//! on-disk precision, so a save/load round trip is also bit-exact.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BallState, PitchSpec, Sequence, Team};
use crate::error::DataError;
use crate::rng::{derive_rng, stream};

/// Ball-to-holder distance during possession, comfortably under the 0.5 m
/// labeling bound even after f32 quantization.
pub const POSSESSION_OFFSET_M: f64 = 0.35;
/// A loose ball is recovered when the nearest player gets this close.
pub const PICKUP_RADIUS_M: f64 = 0.8;
/// Constant friction deceleration of a loose ball.
pub const BALL_FRICTION_MPS2: f64 = 6.0;

/// Receivers ahead of the passer (toward the attacked goal) carry this
/// sampling weight; receivers behind carry the complement.
const FORWARD_WEIGHT: f64 = 0.7;
const BACKWARD_WEIGHT: f64 = 0.3;

// Player motion constants: velocity persistence, pull toward the formation
// anchor, and white-noise scale of the mean-reverting update.
const VEL_PERSIST: f64 = 0.85;
const ANCHOR_PULL: f64 = 0.8;
const MOTION_NOISE: f64 = 2.5;
const CHASE_BLEND: f64 = 0.4;
const CHASE_NOISE: f64 = 0.3;
/// Interception targets are clamped this far inside the pitch boundary.
const TARGET_INSET_M: f64 = 1.0;
/// Interception lookahead cap, seconds.
const MAX_INTERCEPT_S: f64 = 5.0;

/// Everything the generator needs to produce one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub n_players_per_team: usize,
    pub n_frames: usize,
    pub frame_rate_hz: f64,
    pub pitch: PitchSpec,
    /// Kick speed bounds in m/s, drawn uniformly per pass.
    pub pass_speed: (f64, f64),
    /// Possession episode length bounds in frames, inclusive.
    pub possession_hold: (usize, usize),
    /// Probability that a pass reception fails and the ball runs loose.
    pub p_uncontrolled: f64,
    /// Receivers are drawn from teammates within this radius of the passer.
    pub pass_radius: f64,
    pub player_speed_limit: f64,
    /// Std-dev of per-player offsets from the shared formation grid, meters.
    pub formation_jitter: f64,
    pub crop_dim: usize,
    /// Strength of the ball-visibility term in crop features.
    pub crop_signal_gain: f64,
    /// Per-frame noise scale on crop features.
    pub crop_noise_sigma: f64,
    /// σ in the visibility term exp(-d²/σ²), meters.
    pub ball_visibility_radius: f64,
    /// Probability that the crop is missing at a given (frame, player).
    pub crop_dropout: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_players_per_team: 11,
            n_frames: 60,
            frame_rate_hz: 6.25,
            pitch: PitchSpec::default(),
            pass_speed: (9.0, 16.0),
            possession_hold: (4, 15),
            p_uncontrolled: 0.15,
            pass_radius: 30.0,
            player_speed_limit: 8.0,
            formation_jitter: 3.0,
            crop_dim: 32,
            crop_signal_gain: 0.8,
            crop_noise_sigma: 0.05,
            ball_visibility_radius: 2.0,
            crop_dropout: 0.05,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::BadParam(msg));
        if self.n_players_per_team == 0 {
            return bad("n_players_per_team must be at least 1".into());
        }
        if self.n_frames < 2 {
            return bad(format!("n_frames must be at least 2, got {}", self.n_frames));
        }
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return bad(format!("frame_rate_hz must be positive, got {}", self.frame_rate_hz));
        }
        PitchSpec::new(self.pitch.length, self.pitch.width)?;
        if !(self.pass_speed.0 > 0.0 && self.pass_speed.0 <= self.pass_speed.1) {
            return bad(format!(
                "pass_speed bounds must satisfy 0 < min <= max, got {:?}",
                self.pass_speed
            ));
        }
        if self.possession_hold.0 == 0 || self.possession_hold.0 > self.possession_hold.1 {
            return bad(format!(
                "possession_hold bounds must satisfy 1 <= min <= max, got {:?}",
                self.possession_hold
            ));
        }
        for (name, p) in [
            ("p_uncontrolled", self.p_uncontrolled),
            ("crop_dropout", self.crop_dropout),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        for (name, v) in [
            ("pass_radius", self.pass_radius),
            ("player_speed_limit", self.player_speed_limit),
            ("ball_visibility_radius", self.ball_visibility_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be strictly positive, got {v}"));
            }
        }
        for (name, v) in [
            ("formation_jitter", self.formation_jitter),
            ("crop_signal_gain", self.crop_signal_gain),
            ("crop_noise_sigma", self.crop_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.crop_dim == 0 {
            return bad("crop_dim must be at least 1".into());
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        2 * self.n_players_per_team
    }
}

/// Generates one sequence; `id` selects the RNG streams, so ids double as
/// reproducible "match identities".
pub fn generate_sequence(params: &GenParams, id: u64) -> Result<Sequence, DataError> {
    params.validate()?;
    Ok(simulate_match(params, id))
}

/// Generates `count` sequences with ids `0..count`, in parallel.
pub fn generate_dataset(params: &GenParams, count: usize) -> Result<Vec<Sequence>, DataError> {
    params.validate()?;
    Ok((0..count)
        .into_par_iter()
        .map(|i| simulate_match(params, i as u64))
        .collect())
}

/// The fixed unit direction in feature space along which ball visibility
/// expresses itself; a decaying profile rather than a flat one so individual
/// components carry different signal strengths.
pub fn visibility_direction(d_c: usize) -> Array1<f64> {
    let mut u = Array1::from_shape_fn(d_c, |k| (-(k as f64) / 8.0).exp());
    let norm = u.dot(&u).sqrt();
    u /= norm;
    u
}

/// Synthesizes crop feature vectors for an existing sequence:
/// `clip(base_n + gain * exp(-d²/σ²) * direction + noise)` per (frame,
/// player), where `d` is that player's distance to the ball and `base_n` is
/// a per-player identity vector. Also draws per-cell dropout, returning the
/// resulting presence mask. Positions must be in meters (unnormalized).
pub fn simulate_crop_features(
    seq: &Sequence,
    params: &GenParams,
    rng: &mut ChaCha8Rng,
) -> (Array3<f64>, Array2<bool>) {
    let t_n = seq.n_frames();
    let n = seq.n_agents();
    let d_c = params.crop_dim;
    let u = visibility_direction(d_c);
    let sigma2 = params.ball_visibility_radius * params.ball_visibility_radius;

    let mut base = Array2::zeros((n, d_c));
    for i in 0..n {
        for k in 0..d_c {
            base[[i, k]] = rng.gen_range(0.05..0.45);
        }
    }

    let mut features = Array3::zeros((t_n, n, d_c));
    let mut present = Array2::from_elem((t_n, n), false);
    for t in 0..t_n {
        for i in 0..n {
            let dx = seq.ball_positions[[t, 0]] - seq.positions[[t, i, 0]];
            let dy = seq.ball_positions[[t, 1]] - seq.positions[[t, i, 1]];
            let vis = (-(dx * dx + dy * dy) / sigma2).exp();
            for k in 0..d_c {
                let noise: f64 = rng.sample(StandardNormal);
                let v = base[[i, k]]
                    + params.crop_signal_gain * vis * u[k]
                    + params.crop_noise_sigma * noise;
                features[[t, i, k]] = q32(v.clamp(0.0, 1.0));
            }
            let drop: f64 = rng.gen();
            let visible = seq.agent_valid[i] && drop >= params.crop_dropout;
            present[[t, i]] = visible;
            if !visible {
                for k in 0..d_c {
                    features[[t, i, k]] = 0.0;
                }
            }
        }
    }
    (features, present)
}

/// Rounds through f32, the on-disk precision.
pub(crate) fn q32(x: f64) -> f64 {
    x as f32 as f64
}

/// Ball control state advanced frame by frame.
enum Phase {
    Hold {
        holder: usize,
        frames_left: usize,
        angle: f64,
    },
    Flight(Flight),
    Loose {
        toucher: usize,
        dir: [f64; 2],
        speed: f64,
    },
}

#[derive(Clone, Copy)]
struct Flight {
    passer: usize,
    receiver: usize,
    target: [f64; 2],
    dir: [f64; 2],
    speed: f64,
    remaining: f64,
}

fn simulate_match(params: &GenParams, id: u64) -> Sequence {
    let mut rng = derive_rng(&[params.seed, id, stream::MOTION]);
    let t_n = params.n_frames;
    let n = params.n_agents();
    let per_team = params.n_players_per_team;
    let dt = 1.0 / params.frame_rate_hz;
    let half_l = params.pitch.length / 2.0;
    let half_w = params.pitch.width / 2.0;
    let hold = params.possession_hold;

    // Agents [0, per_team) are offense, the rest defense; the model is
    // permutation-equivariant, so slot order carries no information.
    let teams: Vec<Team> = (0..n)
        .map(|i| if i < per_team { Team::Offense } else { Team::Defense })
        .collect();

    let anchors = formation_anchors(params, &mut rng);
    let mut pos: Vec<[f64; 2]> = anchors
        .iter()
        .map(|a| {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            [
                (a[0] + 1.5 * zx).clamp(-half_l, half_l),
                (a[1] + 1.5 * zy).clamp(-half_w, half_w),
            ]
        })
        .collect();
    let mut vel: Vec<[f64; 2]> = vec![[0.0, 0.0]; n];

    let mut positions = Array3::zeros((t_n, n, 2));
    let mut ball_track = Array2::zeros((t_n, 2));
    let mut states = Vec::with_capacity(t_n);
    let mut possessor = Vec::with_capacity(t_n);

    let first_holder = rng.gen_range(0..n);
    let first_frames = rng.gen_range(hold.0..=hold.1);
    let first_angle = rng.gen_range(0.0..TAU);
    let mut ball = add(pos[first_holder], offset_vec(first_angle));
    let mut phase = Phase::Hold {
        holder: first_holder,
        frames_left: first_frames - 1,
        angle: first_angle,
    };
    record_frame(&mut positions, &mut ball_track, &pos, ball, 0);
    states.push(BallState::Possession);
    possessor.push(first_holder);

    for t in 1..t_n {
        // Who deviates from anchor-seeking this frame, and toward what.
        let mut chase: Vec<Option<([f64; 2], f64)>> = vec![None; n];
        match &phase {
            Phase::Hold { holder, .. } => {
                if let Some(presser) = nearest_of_team(&pos, &teams, teams[*holder].opponent(), pos[*holder]) {
                    chase[presser] = Some((pos[*holder], 0.9 * params.player_speed_limit));
                }
            }
            Phase::Flight(f) => {
                let time_left = (f.remaining / f.speed).max(dt);
                let d = dist(pos[f.receiver], f.target);
                let pace = (d / time_left * 1.05).min(0.95 * params.player_speed_limit);
                chase[f.receiver] = Some((f.target, pace));
            }
            Phase::Loose { .. } => {
                if let Some((nearest, _)) = nearest_player(&pos, ball) {
                    chase[nearest] = Some((ball, 0.95 * params.player_speed_limit));
                }
            }
        }

        for i in 0..n {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            let (mut vx, mut vy) = match chase[i] {
                Some((target, pace)) => {
                    let dx = target[0] - pos[i][0];
                    let dy = target[1] - pos[i][1];
                    let d = (dx * dx + dy * dy).sqrt().max(1e-9);
                    (
                        (1.0 - CHASE_BLEND) * vel[i][0]
                            + CHASE_BLEND * (dx / d * pace)
                            + CHASE_NOISE * dt.sqrt() * zx,
                        (1.0 - CHASE_BLEND) * vel[i][1]
                            + CHASE_BLEND * (dy / d * pace)
                            + CHASE_NOISE * dt.sqrt() * zy,
                    )
                }
                None => (
                    VEL_PERSIST * vel[i][0]
                        + ANCHOR_PULL * (anchors[i][0] - pos[i][0]) * dt
                        + MOTION_NOISE * dt.sqrt() * zx,
                    VEL_PERSIST * vel[i][1]
                        + ANCHOR_PULL * (anchors[i][1] - pos[i][1]) * dt
                        + MOTION_NOISE * dt.sqrt() * zy,
                ),
            };
            let speed = (vx * vx + vy * vy).sqrt();
            if speed > params.player_speed_limit {
                vx *= params.player_speed_limit / speed;
                vy *= params.player_speed_limit / speed;
            }
            vel[i] = [vx, vy];
            pos[i][0] = (pos[i][0] + vx * dt).clamp(-half_l, half_l);
            pos[i][1] = (pos[i][1] + vy * dt).clamp(-half_w, half_w);
        }

        let (next_phase, next_ball, state, toucher) = match phase {
            Phase::Hold {
                holder,
                frames_left,
                angle,
            } => {
                if frames_left > 0 {
                    let b = add(pos[holder], offset_vec(angle));
                    (
                        Phase::Hold {
                            holder,
                            frames_left: frames_left - 1,
                            angle,
                        },
                        b,
                        BallState::Possession,
                        holder,
                    )
                } else {
                    match pick_receiver(holder, &pos, &teams, params, &mut rng) {
                        None => {
                            // No teammate to pass to; keep the ball.
                            let frames = rng.gen_range(hold.0..=hold.1);
                            let b = add(pos[holder], offset_vec(angle));
                            (
                                Phase::Hold {
                                    holder,
                                    frames_left: frames.saturating_sub(1),
                                    angle,
                                },
                                b,
                                BallState::Possession,
                                holder,
                            )
                        }
                        Some(receiver) => {
                            let speed = rng.gen_range(params.pass_speed.0..=params.pass_speed.1);
                            let raw = intercept_point(ball, pos[receiver], vel[receiver], speed);
                            let target = [
                                raw[0].clamp(-half_l + TARGET_INSET_M, half_l - TARGET_INSET_M),
                                raw[1].clamp(-half_w + TARGET_INSET_M, half_w - TARGET_INSET_M),
                            ];
                            let to_target = sub(target, ball);
                            let d = norm(to_target);
                            if d < 1e-6 {
                                // Receiver is already on the ball: hand it over.
                                let angle = rng.gen_range(0.0..TAU);
                                let frames = rng.gen_range(hold.0..=hold.1);
                                let b = add(pos[receiver], offset_vec(angle));
                                (
                                    Phase::Hold {
                                        holder: receiver,
                                        frames_left: frames - 1,
                                        angle,
                                    },
                                    b,
                                    BallState::Possession,
                                    receiver,
                                )
                            } else {
                                let flight = Flight {
                                    passer: holder,
                                    receiver,
                                    target,
                                    dir: scale(to_target, 1.0 / d),
                                    speed,
                                    remaining: d,
                                };
                                advance_flight(flight, ball, params, &pos, &mut rng)
                            }
                        }
                    }
                }
            }
            Phase::Flight(f) => advance_flight(f, ball, params, &pos, &mut rng),
            Phase::Loose {
                toucher,
                dir,
                speed,
            } => {
                let recovery = nearest_player(&pos, ball)
                    .filter(|(_, d)| *d <= PICKUP_RADIUS_M)
                    .map(|(i, _)| i);
                match recovery {
                    Some(recoverer) => {
                        let angle = rng.gen_range(0.0..TAU);
                        let frames = rng.gen_range(hold.0..=hold.1);
                        let b = add(pos[recoverer], offset_vec(angle));
                        (
                            Phase::Hold {
                                holder: recoverer,
                                frames_left: frames - 1,
                                angle,
                            },
                            b,
                            BallState::Possession,
                            recoverer,
                        )
                    }
                    None => {
                        let slower = (speed - BALL_FRICTION_MPS2 * dt).max(0.0);
                        let moved = add(ball, scale(dir, slower * dt));
                        let (b, dir) = reflect_into_pitch(moved, dir, half_l, half_w);
                        (
                            Phase::Loose {
                                toucher,
                                dir,
                                speed: slower,
                            },
                            b,
                            BallState::Uncontrolled,
                            toucher,
                        )
                    }
                }
            }
        };
        phase = next_phase;
        ball = next_ball;
        record_frame(&mut positions, &mut ball_track, &pos, ball, t);
        states.push(state);
        possessor.push(toucher);
    }

    positions.mapv_inplace(q32);
    ball_track.mapv_inplace(q32);

    let mut player_types = Array2::zeros((n, 2));
    for (i, team) in teams.iter().enumerate() {
        let one_hot = team.one_hot();
        player_types[[i, 0]] = one_hot[0];
        player_types[[i, 1]] = one_hot[1];
    }

    let mut seq = Sequence {
        id,
        positions,
        player_types,
        crop_features: Array3::zeros((t_n, n, 0)),
        crop_present: Array2::from_elem((t_n, n), false),
        agent_valid: vec![true; n],
        ball_positions: ball_track,
        ball_states: states,
        possessor,
        frame_rate_hz: params.frame_rate_hz,
        normalized: false,
    };
    let mut crop_rng = derive_rng(&[params.seed, id, stream::CROPS]);
    let (features, present) = simulate_crop_features(&seq, params, &mut crop_rng);
    seq.crop_features = features;
    seq.crop_present = present;
    debug_assert!(seq.validate(&params.pitch).is_ok());
    seq
}

/// One frame of ball flight: advance along the fixed line, and on arrival
/// either the receiver takes possession or the reception fails and the ball
/// runs loose at flight speed.
fn advance_flight(
    f: Flight,
    ball: [f64; 2],
    params: &GenParams,
    pos: &[[f64; 2]],
    rng: &mut ChaCha8Rng,
) -> (Phase, [f64; 2], BallState, usize) {
    let dt = 1.0 / params.frame_rate_hz;
    let half_l = params.pitch.length / 2.0;
    let half_w = params.pitch.width / 2.0;
    let step = f.speed * dt;
    if step + 1e-12 < f.remaining {
        let b = add(ball, scale(f.dir, step));
        let mut next = f;
        next.remaining -= step;
        return (Phase::Flight(next), b, BallState::Pass, f.passer);
    }
    if rng.gen::<f64>() < params.p_uncontrolled {
        let moved = add(ball, scale(f.dir, step));
        let (b, dir) = reflect_into_pitch(moved, f.dir, half_l, half_w);
        (
            Phase::Loose {
                toucher: f.passer,
                dir,
                speed: f.speed,
            },
            b,
            BallState::Uncontrolled,
            f.passer,
        )
    } else {
        let angle = rng.gen_range(0.0..TAU);
        let frames = rng.gen_range(params.possession_hold.0..=params.possession_hold.1);
        let b = add(pos[f.receiver], offset_vec(angle));
        (
            Phase::Hold {
                holder: f.receiver,
                frames_left: frames - 1,
                angle,
            },
            b,
            BallState::Possession,
            f.receiver,
        )
    }
}

/// Distance between neighboring formation anchors; keeps teammates within
/// realistic passing range regardless of team size.
const ANCHOR_SPACING_M: f64 = 14.0;

/// Both teams draw anchors around the same grid spots (with independent
/// jitter), so positions alone never reveal team identity; the pairing also
/// reads as man-marking.
fn formation_anchors(params: &GenParams, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let per_team = params.n_players_per_team;
    let side_x = (per_team as f64).sqrt().ceil() as usize;
    let side_y = per_team.div_ceil(side_x);
    let span = |cells: usize, pitch_extent: f64| {
        (ANCHOR_SPACING_M * cells.saturating_sub(1) as f64).min(0.76 * pitch_extent)
    };
    let span_x = span(side_x, params.pitch.length);
    let span_y = span(side_y, params.pitch.width);
    let cell = |k: usize| -> [f64; 2] {
        let place = |idx: usize, cells: usize, span: f64| {
            if cells == 1 {
                0.0
            } else {
                -span / 2.0 + span * idx as f64 / (cells - 1) as f64
            }
        };
        [
            place(k % side_x, side_x, span_x),
            place(k / side_x, side_y, span_y),
        ]
    };
    let mut anchors = Vec::with_capacity(2 * per_team);
    for _team in 0..2 {
        for k in 0..per_team {
            let c = cell(k);
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            anchors.push([
                c[0] + params.formation_jitter * zx,
                c[1] + params.formation_jitter * zy,
            ]);
        }
    }
    anchors
}

/// Teammates within the pass radius, weighted toward forward progress
/// (offense attacks +x, defense -x); falls back to the nearest teammate.
fn pick_receiver(
    holder: usize,
    pos: &[[f64; 2]],
    teams: &[Team],
    params: &GenParams,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let team = teams[holder];
    let attack_sign = match team {
        Team::Offense => 1.0,
        Team::Defense => -1.0,
    };
    let mut candidates: Vec<usize> = (0..pos.len())
        .filter(|&i| i != holder && teams[i] == team && dist(pos[i], pos[holder]) <= params.pass_radius)
        .collect();
    if candidates.is_empty() {
        let nearest = (0..pos.len())
            .filter(|&i| i != holder && teams[i] == team)
            .min_by(|&a, &b| {
                dist(pos[a], pos[holder])
                    .partial_cmp(&dist(pos[b], pos[holder]))
                    .unwrap()
            })?;
        candidates.push(nearest);
    }
    let weights: Vec<f64> = candidates
        .iter()
        .map(|&i| {
            if attack_sign * (pos[i][0] - pos[holder][0]) > 0.0 {
                FORWARD_WEIGHT
            } else {
                BACKWARD_WEIGHT
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in candidates.iter().zip(&weights) {
        if x < *w {
            return Some(*i);
        }
        x -= w;
    }
    candidates.last().copied()
}

/// Where a ball kicked now at `speed` meets a receiver moving at constant
/// velocity: the positive root of |r + v·τ - b| = speed·τ. Falls back to the
/// receiver's current spot when no intercept exists.
fn intercept_point(ball: [f64; 2], receiver: [f64; 2], receiver_vel: [f64; 2], speed: f64) -> [f64; 2] {
    let w = sub(receiver, ball);
    let a = receiver_vel[0] * receiver_vel[0] + receiver_vel[1] * receiver_vel[1] - speed * speed;
    let b = 2.0 * (w[0] * receiver_vel[0] + w[1] * receiver_vel[1]);
    let c = w[0] * w[0] + w[1] * w[1];
    let tau = if a.abs() < 1e-9 {
        if b.abs() < 1e-9 {
            0.0
        } else {
            (-c / b).max(0.0)
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            0.0
        } else {
            let r1 = (-b + disc.sqrt()) / (2.0 * a);
            let r2 = (-b - disc.sqrt()) / (2.0 * a);
            let smallest_positive = [r1, r2]
                .into_iter()
                .filter(|r| *r > 0.0)
                .fold(f64::INFINITY, f64::min);
            if smallest_positive.is_finite() {
                smallest_positive
            } else {
                0.0
            }
        }
    }
    .min(MAX_INTERCEPT_S);
    [
        receiver[0] + receiver_vel[0] * tau,
        receiver[1] + receiver_vel[1] * tau,
    ]
}

/// Bounces a ball that left the pitch box back inside, flipping the matching
/// direction components; preserves speed, so deceleration stays constant.
fn reflect_into_pitch(
    mut p: [f64; 2],
    mut dir: [f64; 2],
    half_l: f64,
    half_w: f64,
) -> ([f64; 2], [f64; 2]) {
    for _ in 0..8 {
        let mut adjusted = false;
        if p[0] > half_l {
            p[0] = 2.0 * half_l - p[0];
            dir[0] = -dir[0];
            adjusted = true;
        } else if p[0] < -half_l {
            p[0] = -2.0 * half_l - p[0];
            dir[0] = -dir[0];
            adjusted = true;
        }
        if p[1] > half_w {
            p[1] = 2.0 * half_w - p[1];
            dir[1] = -dir[1];
            adjusted = true;
        } else if p[1] < -half_w {
            p[1] = -2.0 * half_w - p[1];
            dir[1] = -dir[1];
            adjusted = true;
        }
        if !adjusted {
            break;
        }
    }
    (p, dir)
}

fn nearest_player(pos: &[[f64; 2]], point: [f64; 2]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pos.iter().enumerate() {
        let d = dist(*p, point);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

fn nearest_of_team(pos: &[[f64; 2]], teams: &[Team], team: Team, point: [f64; 2]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..pos.len() {
        if teams[i] != team {
            continue;
        }
        let d = dist(pos[i], point);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

fn record_frame(
    positions: &mut Array3<f64>,
    ball_track: &mut Array2<f64>,
    pos: &[[f64; 2]],
    ball: [f64; 2],
    t: usize,
) {
    for (i, p) in pos.iter().enumerate() {
        positions[[t, i, 0]] = p[0];
        positions[[t, i, 1]] = p[1];
    }
    ball_track[[t, 0]] = ball[0];
    ball_track[[t, 1]] = ball[1];
}

fn offset_vec(angle: f64) -> [f64; 2] {
    [POSSESSION_OFFSET_M * angle.cos(), POSSESSION_OFFSET_M * angle.sin()]
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn scale(a: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] * s, a[1] * s]
}

fn norm(a: [f64; 2]) -> f64 {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::label_runs;

    fn small_params(seed: u64) -> GenParams {
        GenParams {
            n_players_per_team: 3,
            n_frames: 30,
            crop_dim: 4,
            seed,
            ..GenParams::default()
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let params = small_params(11);
        let a = generate_dataset(&params, 20).unwrap();
        let b = generate_dataset(&params, 20).unwrap();
        assert_eq!(a, b);
        let solo = generate_sequence(&params, 7).unwrap();
        assert_eq!(solo, a[7]);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_sequence(&small_params(1), 0).unwrap();
        let b = generate_sequence(&small_params(2), 0).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn possession_ball_stays_within_half_meter_of_possessor() {
        let params = small_params(3);
        for seq in generate_dataset(&params, 1000).unwrap() {
            for t in 0..seq.n_frames() {
                if seq.ball_states[t] == BallState::Possession {
                    let p = seq.possessor[t];
                    let dx = seq.ball_positions[[t, 0]] - seq.positions[[t, p, 0]];
                    let dy = seq.ball_positions[[t, 1]] - seq.positions[[t, p, 1]];
                    let d = (dx * dx + dy * dy).sqrt();
                    assert!(d <= 0.5, "seq {} frame {t}: ball {d} m from possessor", seq.id);
                }
            }
        }
    }

    #[test]
    fn generated_sequences_validate() {
        let params = small_params(4);
        for seq in generate_dataset(&params, 200).unwrap() {
            seq.validate(&params.pitch).unwrap();
        }
    }

    #[test]
    fn zero_uncontrolled_probability_never_labels_uncontrolled() {
        let params = GenParams {
            p_uncontrolled: 0.0,
            ..small_params(5)
        };
        for seq in generate_dataset(&params, 200).unwrap() {
            assert!(seq
                .ball_states
                .iter()
                .all(|s| *s != BallState::Uncontrolled));
        }
    }

    #[test]
    fn pass_speed_is_constant_within_each_flight() {
        let params = small_params(6);
        let mut checked = 0usize;
        for seq in generate_dataset(&params, 100).unwrap() {
            let dt = 1.0 / seq.frame_rate_hz;
            for (state, range) in label_runs(&seq.ball_states) {
                if state != BallState::Pass || range.len() < 2 {
                    continue;
                }
                let step_norm = |t: usize| {
                    let dx = seq.ball_positions[[t + 1, 0]] - seq.ball_positions[[t, 0]];
                    let dy = seq.ball_positions[[t + 1, 1]] - seq.ball_positions[[t, 1]];
                    (dx * dx + dy * dy).sqrt()
                };
                let first = step_norm(range.start);
                for t in range.start..range.end - 1 {
                    let s = step_norm(t);
                    assert!(
                        (s - first).abs() <= 1e-4 * first,
                        "seq {} flight step {s} vs {first}",
                        seq.id
                    );
                    checked += 1;
                }
                let speed = first / dt;
                assert!(
                    speed >= params.pass_speed.0 - 1e-6 && speed <= params.pass_speed.1 + 1e-6,
                    "flight speed {speed} outside configured bounds"
                );
            }
        }
        assert!(checked > 100, "too few flight steps exercised: {checked}");
    }

    #[test]
    fn possessor_is_last_toucher_and_passes_stay_in_team() {
        let params = small_params(7);
        let mut receptions = 0usize;
        for seq in generate_dataset(&params, 200).unwrap() {
            let runs = label_runs(&seq.ball_states);
            for (i, (state, range)) in runs.iter().enumerate() {
                // one label per touch episode
                let p0 = seq.possessor[range.start];
                assert!(range.clone().all(|t| seq.possessor[t] == p0));
                match state {
                    BallState::Pass | BallState::Uncontrolled => {
                        // in-flight and loose balls still belong to the last toucher
                        if range.start > 0 {
                            assert_eq!(p0, seq.possessor[range.start - 1]);
                        }
                    }
                    BallState::Possession => {
                        if let Some((prev_state, prev_range)) = i.checked_sub(1).map(|j| &runs[j]) {
                            if *prev_state == BallState::Pass {
                                let passer = seq.possessor[prev_range.start];
                                assert_eq!(
                                    seq.team_of(passer),
                                    seq.team_of(p0),
                                    "completed pass crossed teams"
                                );
                                receptions += 1;
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        assert!(receptions > 100, "too few receptions exercised: {receptions}");
    }

    #[test]
    fn loose_ball_decelerates_at_constant_friction() {
        let params = GenParams {
            p_uncontrolled: 0.8,
            ..small_params(8)
        };
        let dt = 1.0 / params.frame_rate_hz;
        let expected_drop = BALL_FRICTION_MPS2 * dt * dt;
        let mut checked = 0usize;
        for seq in generate_dataset(&params, 200).unwrap() {
            for (state, range) in label_runs(&seq.ball_states) {
                if state != BallState::Uncontrolled || range.len() < 3 {
                    continue;
                }
                let step_norm = |t: usize| {
                    let dx = seq.ball_positions[[t + 1, 0]] - seq.ball_positions[[t, 0]];
                    let dy = seq.ball_positions[[t + 1, 1]] - seq.ball_positions[[t, 1]];
                    (dx * dx + dy * dy).sqrt()
                };
                for t in range.start..range.end - 2 {
                    let s0 = step_norm(t);
                    let s1 = step_norm(t + 1);
                    if s1 == 0.0 {
                        continue; // ball has stopped; friction floors at zero
                    }
                    assert!(
                        ((s0 - s1) - expected_drop).abs() <= 1e-3,
                        "seq {} friction drop {} vs {expected_drop}",
                        seq.id,
                        s0 - s1
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 50, "too few loose-ball steps exercised: {checked}");
    }

    #[test]
    fn reception_failure_rate_matches_p_uncontrolled() {
        let params = GenParams {
            p_uncontrolled: 0.3,
            ..small_params(9)
        };
        let mut arrivals = 0usize;
        let mut failures = 0usize;
        for seq in generate_dataset(&params, 2000).unwrap() {
            let runs = label_runs(&seq.ball_states);
            for pair in runs.windows(2) {
                if pair[0].0 == BallState::Pass {
                    arrivals += 1;
                    if pair[1].0 == BallState::Uncontrolled {
                        failures += 1;
                    }
                }
            }
        }
        assert!(arrivals > 2000, "too few arrivals: {arrivals}");
        let rate = failures as f64 / arrivals as f64;
        assert!(
            (rate - 0.3).abs() <= 0.02,
            "failure rate {rate} not within 2% of configured 0.3 ({failures}/{arrivals})"
        );
    }

    #[test]
    fn players_respect_speed_limit() {
        let params = small_params(10);
        let dt = 1.0 / params.frame_rate_hz;
        for seq in generate_dataset(&params, 50).unwrap() {
            for t in 0..seq.n_frames() - 1 {
                for i in 0..seq.n_agents() {
                    let dx = seq.positions[[t + 1, i, 0]] - seq.positions[[t, i, 0]];
                    let dy = seq.positions[[t + 1, i, 1]] - seq.positions[[t, i, 1]];
                    let speed = (dx * dx + dy * dy).sqrt() / dt;
                    assert!(
                        speed <= params.player_speed_limit + 1e-4,
                        "player {i} moved at {speed} m/s"
                    );
                }
            }
        }
    }

    #[test]
    fn ball_stays_inside_the_pitch_box() {
        let params = GenParams {
            p_uncontrolled: 0.5,
            ..small_params(12)
        };
        let half_l = params.pitch.length / 2.0;
        let half_w = params.pitch.width / 2.0;
        for seq in generate_dataset(&params, 300).unwrap() {
            for t in 0..seq.n_frames() {
                let x = seq.ball_positions[[t, 0]];
                let y = seq.ball_positions[[t, 1]];
                assert!(x.abs() <= half_l + 0.5 && y.abs() <= half_w + 0.5);
            }
        }
    }

    #[test]
    fn colocated_and_distant_crop_features_match_closed_forms() {
        // One player exactly on the ball, one 50 m away, zero noise: the
        // visibility term is exactly 1 and effectively 0 respectively.
        let t_n = 3;
        let base_params = GenParams {
            n_players_per_team: 1,
            n_frames: t_n,
            crop_dim: 6,
            crop_noise_sigma: 0.0,
            crop_dropout: 0.0,
            seed: 99,
            ..GenParams::default()
        };
        let mut seq = crate::data::tests::toy_sequence(0, t_n, 2, 0, 42);
        for t in 0..t_n {
            seq.ball_positions[[t, 0]] = 5.0;
            seq.ball_positions[[t, 1]] = -3.0;
            seq.positions[[t, 0, 0]] = 5.0;
            seq.positions[[t, 0, 1]] = -3.0;
            seq.positions[[t, 1, 0]] = -45.0;
            seq.positions[[t, 1, 1]] = -3.0;
        }

        let with_gain = {
            let mut rng = derive_rng(&[7, 7, 7]);
            simulate_crop_features(&seq, &base_params, &mut rng).0
        };
        let without_gain = {
            let mut rng = derive_rng(&[7, 7, 7]);
            let p = GenParams {
                crop_signal_gain: 0.0,
                ..base_params.clone()
            };
            simulate_crop_features(&seq, &p, &mut rng).0
        };

        let u = visibility_direction(6);
        for t in 0..t_n {
            for k in 0..6 {
                let lift = with_gain[[t, 0, k]] - without_gain[[t, 0, k]];
                assert!(
                    (lift - base_params.crop_signal_gain * u[k]).abs() <= 1e-6,
                    "co-located lift {lift} vs {}",
                    base_params.crop_signal_gain * u[k]
                );
                assert_eq!(
                    with_gain[[t, 1, k]],
                    without_gain[[t, 1, k]],
                    "50 m visibility term must vanish"
                );
            }
        }
    }

    #[test]
    fn possessor_crops_project_higher_onto_visibility_direction() {
        let params = GenParams {
            crop_dim: 8,
            ..small_params(13)
        };
        let u = visibility_direction(8);
        let (mut poss_sum, mut poss_n) = (0.0, 0.0);
        let (mut other_sum, mut other_n) = (0.0, 0.0);
        for seq in generate_dataset(&params, 200).unwrap() {
            for t in 0..seq.n_frames() {
                for i in 0..seq.n_agents() {
                    if !seq.crop_present[[t, i]] {
                        continue;
                    }
                    let proj: f64 = (0..8).map(|k| seq.crop_features[[t, i, k]] * u[k]).sum();
                    if seq.possessor[t] == i && seq.ball_states[t] == BallState::Possession {
                        poss_sum += proj;
                        poss_n += 1.0;
                    } else {
                        other_sum += proj;
                        other_n += 1.0;
                    }
                }
            }
        }
        let poss_mean = poss_sum / poss_n;
        let other_mean = other_sum / other_n;
        assert!(
            poss_mean > other_mean + 0.3,
            "possessor projection {poss_mean} vs others {other_mean}"
        );
    }

    #[test]
    fn crop_dropout_controls_presence_rate() {
        let params = GenParams {
            crop_dropout: 0.25,
            ..small_params(14)
        };
        let mut present = 0usize;
        let mut total = 0usize;
        for seq in generate_dataset(&params, 200).unwrap() {
            present += seq.crop_present.iter().filter(|p| **p).count();
            total += seq.crop_present.len();
        }
        let rate = present as f64 / total as f64;
        assert!((rate - 0.75).abs() <= 0.01, "presence rate {rate}");

        let none_dropped = GenParams {
            crop_dropout: 0.0,
            ..small_params(14)
        };
        let seq = generate_sequence(&none_dropped, 0).unwrap();
        assert!(seq.crop_present.iter().all(|p| *p));
    }

    #[test]
    fn degenerate_params_are_rejected() {
        let ok = GenParams::default();
        ok.validate().unwrap();
        let cases = [
            GenParams { n_players_per_team: 0, ..ok.clone() },
            GenParams { n_frames: 1, ..ok.clone() },
            GenParams { frame_rate_hz: 0.0, ..ok.clone() },
            GenParams { pass_speed: (0.0, 10.0), ..ok.clone() },
            GenParams { pass_speed: (12.0, 10.0), ..ok.clone() },
            GenParams { possession_hold: (0, 5), ..ok.clone() },
            GenParams { p_uncontrolled: 1.5, ..ok.clone() },
            GenParams { crop_dropout: -0.1, ..ok.clone() },
            GenParams { ball_visibility_radius: 0.0, ..ok.clone() },
            GenParams { crop_dim: 0, ..ok.clone() },
            GenParams { crop_noise_sigma: -1.0, ..ok.clone() },
        ];
        for (i, bad) in cases.iter().enumerate() {
            assert!(
                matches!(bad.validate(), Err(DataError::BadParam(_))),
                "case {i} should be rejected"
            );
        }
    }

    #[test]
    fn coordinates_are_f32_exact() {
        let seq = generate_sequence(&small_params(15), 0).unwrap();
        let all = seq
            .positions
            .iter()
            .chain(seq.ball_positions.iter())
            .chain(seq.crop_features.iter());
        for &v in all {
            assert_eq!(v, q32(v), "value {v} is not representable in f32");
        }
    }
}
