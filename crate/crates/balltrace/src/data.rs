//! Sequences, labels, normalization, and padding.
//!
//! A [`Sequence`] is one clip of gameplay: per-frame player positions, static
//! player types, per-frame per-player crop feature vectors, and the three
//! ground-truth label tracks (ball position, ball state, possessor index).
//! All types here are immutable value objects after construction; transforms
//! return new sequences.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Slack beyond the pitch boundary allowed for positions, in meters.
/// Play continues briefly out of bounds (throw-ins, momentum).
pub const OOB_TOLERANCE_M: f64 = 5.0;

/// Per-frame ball state label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallState {
    Pass,
    Possession,
    Uncontrolled,
}

/// Number of ball state classes seen at training time.
pub const N_STATES: usize = 3;

impl BallState {
    pub fn code(self) -> u8 {
        match self {
            BallState::Pass => 0,
            BallState::Possession => 1,
            BallState::Uncontrolled => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BallState::Pass),
            1 => Some(BallState::Possession),
            2 => Some(BallState::Uncontrolled),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BallState::Pass => "pass",
            BallState::Possession => "possession",
            BallState::Uncontrolled => "uncontrolled",
        }
    }

    pub const ALL: [BallState; N_STATES] =
        [BallState::Pass, BallState::Possession, BallState::Uncontrolled];
}

/// Which of the two teams a player belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Offense,
    Defense,
}

impl Team {
    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Team::Offense => [1.0, 0.0],
            Team::Defense => [0.0, 1.0],
        }
    }

    pub fn opponent(self) -> Team {
        match self {
            Team::Offense => Team::Defense,
            Team::Defense => Team::Offense,
        }
    }
}

/// Pitch dimensions in meters. Defaults to a standard full-size 105 x 68 pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchSpec {
    pub length: f64,
    pub width: f64,
}

impl Default for PitchSpec {
    fn default() -> Self {
        PitchSpec {
            length: 105.0,
            width: 68.0,
        }
    }
}

impl PitchSpec {
    pub fn new(length: f64, width: f64) -> Result<Self, DataError> {
        if !(length > 0.0 && width > 0.0) {
            return Err(DataError::BadParam(format!(
                "pitch dimensions must be strictly positive, got {length} x {width}"
            )));
        }
        Ok(PitchSpec { length, width })
    }
}

/// One clip: player trajectories, types, crop features, and ground truth.
///
/// Coordinates are pitch coordinates: x along the pitch length, y along the
/// width, origin at the center. `normalized` is false for meters and true
/// after [`normalize_sequence`] mapped everything into `[-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: u64,
    /// `[T, N, 2]` player positions.
    pub positions: Array3<f64>,
    /// `[N, 2]` one-hot team vectors; all-zero rows mark padding agents.
    pub player_types: Array2<f64>,
    /// `[T, N, d_c]` crop feature vectors; `d_c` may be 0 when unattached.
    pub crop_features: Array3<f64>,
    /// `[T, N]` false where no crop exists (player out of camera view).
    pub crop_present: Array2<bool>,
    /// `[N]` false for padding slots.
    pub agent_valid: Vec<bool>,
    /// `[T, 2]` ground-truth ball positions.
    pub ball_positions: Array2<f64>,
    /// `[T]` ground-truth ball states.
    pub ball_states: Vec<BallState>,
    /// `[T]` ground-truth possessor indices into the agent axis.
    pub possessor: Vec<usize>,
    pub frame_rate_hz: f64,
    pub normalized: bool,
}

impl Sequence {
    /// Number of frames.
    pub fn n_frames(&self) -> usize {
        self.positions.shape()[0]
    }

    /// Number of agent slots, padding included.
    pub fn n_agents(&self) -> usize {
        self.positions.shape()[1]
    }

    /// Number of valid (non-padding) agents.
    pub fn n_valid_agents(&self) -> usize {
        self.agent_valid.iter().filter(|v| **v).count()
    }

    /// Crop feature dimension; 0 when no features are attached.
    pub fn crop_dim(&self) -> usize {
        self.crop_features.shape()[2]
    }

    pub fn team_of(&self, agent: usize) -> Option<Team> {
        let row = self.player_types.row(agent);
        if row[0] == 1.0 && row[1] == 0.0 {
            Some(Team::Offense)
        } else if row[0] == 0.0 && row[1] == 1.0 {
            Some(Team::Defense)
        } else {
            None
        }
    }

    /// Checks that all array shapes agree with each other.
    pub fn check_shapes(&self) -> Result<(), DataError> {
        let t = self.n_frames();
        let n = self.n_agents();
        let d_c = self.crop_dim();
        let want = |cond: bool, msg: &str| -> Result<(), DataError> {
            if cond {
                Ok(())
            } else {
                Err(DataError::Invariant(msg.to_string()))
            }
        };
        want(
            self.player_types.shape() == [n, 2],
            "player_types must be [N, 2]",
        )?;
        want(
            self.crop_features.shape() == [t, n, d_c],
            "crop_features must be [T, N, d_c]",
        )?;
        want(
            self.crop_present.shape() == [t, n],
            "crop_present must be [T, N]",
        )?;
        want(self.agent_valid.len() == n, "agent_valid must be [N]")?;
        want(
            self.ball_positions.shape() == [t, 2],
            "ball_positions must be [T, 2]",
        )?;
        want(self.ball_states.len() == t, "ball_states must be [T]")?;
        want(self.possessor.len() == t, "possessor must be [T]")?;
        Ok(())
    }

    /// Validates the full set of sequence invariants against a pitch.
    ///
    /// Intended for freshly constructed or ingested sequences; transforms
    /// that deliberately leave the valid range (masking placeholders) do not
    /// re-validate.
    pub fn validate(&self, pitch: &PitchSpec) -> Result<(), DataError> {
        self.check_shapes()?;
        let t = self.n_frames();
        let n = self.n_agents();
        if t < 2 {
            return Err(DataError::Invariant(format!("T must be >= 2, got {t}")));
        }
        if n < 2 {
            return Err(DataError::Invariant(format!("N must be >= 2, got {n}")));
        }
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return Err(DataError::Invariant(format!(
                "frame_rate_hz must be positive, got {}",
                self.frame_rate_hz
            )));
        }

        let (x_bound, y_bound) = position_bounds(pitch, self.normalized);
        for frame in 0..t {
            for agent in 0..n {
                let x = self.positions[[frame, agent, 0]];
                let y = self.positions[[frame, agent, 1]];
                if !x.is_finite() || !y.is_finite() {
                    return Err(DataError::NonFinite { frame, agent });
                }
                if self.agent_valid[agent] && (x.abs() > x_bound || y.abs() > y_bound) {
                    return Err(DataError::Invariant(format!(
                        "position ({x}, {y}) out of bounds at frame {frame}, agent {agent}"
                    )));
                }
            }
            let bx = self.ball_positions[[frame, 0]];
            let by = self.ball_positions[[frame, 1]];
            if !bx.is_finite() || !by.is_finite() {
                return Err(DataError::NonFinite { frame, agent: n });
            }
        }

        for agent in 0..n {
            let row = self.player_types.row(agent);
            if self.agent_valid[agent] {
                if self.team_of(agent).is_none() {
                    return Err(DataError::Invariant(format!(
                        "agent {agent} must carry exactly one team label, got [{}, {}]",
                        row[0], row[1]
                    )));
                }
            } else if row[0] != 0.0 || row[1] != 0.0 {
                return Err(DataError::Invariant(format!(
                    "padding agent {agent} must carry an all-zero type vector"
                )));
            }
        }

        for (frame, &p) in self.possessor.iter().enumerate() {
            if p >= n || !self.agent_valid[p] {
                return Err(DataError::Invariant(format!(
                    "possessor {p} at frame {frame} does not point at a valid agent"
                )));
            }
        }

        for frame in 0..t {
            for agent in 0..n {
                if !self.crop_present[[frame, agent]] {
                    continue;
                }
                for k in 0..self.crop_dim() {
                    let v = self.crop_features[[frame, agent, k]];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(DataError::Invariant(format!(
                            "crop feature {v} outside [0,1] at frame {frame}, agent {agent}, component {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Splits a state track into maximal runs of equal labels, in order.
pub fn label_runs(states: &[BallState]) -> Vec<(BallState, std::ops::Range<usize>)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=states.len() {
        if i == states.len() || states[i] != states[start] {
            runs.push((states[start], start..i));
            start = i;
        }
    }
    runs
}

fn position_bounds(pitch: &PitchSpec, normalized: bool) -> (f64, f64) {
    let x = pitch.length / 2.0 + OOB_TOLERANCE_M;
    let y = pitch.width / 2.0 + OOB_TOLERANCE_M;
    if normalized {
        (2.0 * x / pitch.length, 2.0 * y / pitch.width)
    } else {
        (x, y)
    }
}

/// Maps positions and ball positions from meters into `[-1, 1]^2` via
/// `x' = 2x / length`, `y' = 2y / width`. Labels are untouched.
pub fn normalize_sequence(seq: &Sequence, pitch: &PitchSpec) -> Result<Sequence, DataError> {
    if seq.normalized {
        return Err(DataError::Invariant(
            "sequence is already normalized".to_string(),
        ));
    }
    reject_non_finite(seq)?;
    let mut out = seq.clone();
    scale_coords(&mut out, 2.0 / pitch.length, 2.0 / pitch.width);
    out.normalized = true;
    Ok(out)
}

/// Inverse of [`normalize_sequence`]: maps `[-1, 1]^2` back to meters so
/// reported metrics stay in meters.
pub fn denormalize_sequence(seq: &Sequence, pitch: &PitchSpec) -> Result<Sequence, DataError> {
    if !seq.normalized {
        return Err(DataError::Invariant(
            "sequence is not normalized".to_string(),
        ));
    }
    reject_non_finite(seq)?;
    let mut out = seq.clone();
    scale_coords(&mut out, pitch.length / 2.0, pitch.width / 2.0);
    out.normalized = false;
    Ok(out)
}

/// Maps a single normalized ball coordinate pair back to meters.
pub fn denormalize_point(point: [f64; 2], pitch: &PitchSpec) -> [f64; 2] {
    [point[0] * pitch.length / 2.0, point[1] * pitch.width / 2.0]
}

fn reject_non_finite(seq: &Sequence) -> Result<(), DataError> {
    for frame in 0..seq.n_frames() {
        for agent in 0..seq.n_agents() {
            if !seq.positions[[frame, agent, 0]].is_finite()
                || !seq.positions[[frame, agent, 1]].is_finite()
            {
                return Err(DataError::NonFinite { frame, agent });
            }
        }
        if !seq.ball_positions[[frame, 0]].is_finite()
            || !seq.ball_positions[[frame, 1]].is_finite()
        {
            return Err(DataError::NonFinite {
                frame,
                agent: seq.n_agents(),
            });
        }
    }
    Ok(())
}

fn scale_coords(seq: &mut Sequence, sx: f64, sy: f64) {
    for frame in 0..seq.n_frames() {
        for agent in 0..seq.n_agents() {
            seq.positions[[frame, agent, 0]] *= sx;
            seq.positions[[frame, agent, 1]] *= sy;
        }
        seq.ball_positions[[frame, 0]] *= sx;
        seq.ball_positions[[frame, 1]] *= sy;
    }
}

/// Appends padding agents up to `n_max` slots: zero positions, all-zero type
/// vectors, no crops, `agent_valid = false`. Labels are untouched.
pub fn pad_to(seq: &Sequence, n_max: usize) -> Result<Sequence, DataError> {
    let t = seq.n_frames();
    let n = seq.n_agents();
    let d_c = seq.crop_dim();
    if n_max < n {
        return Err(DataError::PadTooSmall { n, n_max });
    }
    if n_max == n {
        return Ok(seq.clone());
    }

    let mut positions = Array3::zeros((t, n_max, 2));
    positions
        .slice_mut(ndarray::s![.., ..n, ..])
        .assign(&seq.positions);
    let mut player_types = Array2::zeros((n_max, 2));
    player_types
        .slice_mut(ndarray::s![..n, ..])
        .assign(&seq.player_types);
    let mut crop_features = Array3::zeros((t, n_max, d_c));
    crop_features
        .slice_mut(ndarray::s![.., ..n, ..])
        .assign(&seq.crop_features);
    let mut crop_present = Array2::from_elem((t, n_max), false);
    crop_present
        .slice_mut(ndarray::s![.., ..n])
        .assign(&seq.crop_present);
    let mut agent_valid = seq.agent_valid.clone();
    agent_valid.resize(n_max, false);

    Ok(Sequence {
        id: seq.id,
        positions,
        player_types,
        crop_features,
        crop_present,
        agent_valid,
        ball_positions: seq.ball_positions.clone(),
        ball_states: seq.ball_states.clone(),
        possessor: seq.possessor.clone(),
        frame_rate_hz: seq.frame_rate_hz,
        normalized: seq.normalized,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::Array1;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Builds a small valid sequence with positions drawn inside the pitch.
    pub(crate) fn toy_sequence(id: u64, t: usize, n: usize, d_c: usize, seed: u64) -> Sequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pitch = PitchSpec::default();
        let mut positions = Array3::zeros((t, n, 2));
        let mut ball = Array2::zeros((t, 2));
        for frame in 0..t {
            for agent in 0..n {
                positions[[frame, agent, 0]] = rng.gen_range(-pitch.length / 2.0..pitch.length / 2.0);
                positions[[frame, agent, 1]] = rng.gen_range(-pitch.width / 2.0..pitch.width / 2.0);
            }
            ball[[frame, 0]] = rng.gen_range(-pitch.length / 2.0..pitch.length / 2.0);
            ball[[frame, 1]] = rng.gen_range(-pitch.width / 2.0..pitch.width / 2.0);
        }
        let mut player_types = Array2::zeros((n, 2));
        for agent in 0..n {
            let team = if agent < n / 2 { Team::Offense } else { Team::Defense };
            let one_hot = team.one_hot();
            player_types.row_mut(agent).assign(&Array1::from(one_hot.to_vec()));
        }
        let crop_features =
            Array3::from_shape_fn((t, n, d_c), |_| rng.gen_range(0.0..=1.0));
        let crop_present = Array2::from_elem((t, n), true);
        let ball_states = (0..t)
            .map(|_| BallState::ALL[rng.gen_range(0..N_STATES)])
            .collect();
        let possessor = (0..t).map(|_| rng.gen_range(0..n)).collect();
        Sequence {
            id,
            positions,
            player_types,
            crop_features,
            crop_present,
            agent_valid: vec![true; n],
            ball_positions: ball,
            ball_states,
            possessor,
            frame_rate_hz: 6.25,
            normalized: false,
        }
    }

    #[test]
    fn label_runs_partition_the_track() {
        use BallState::*;
        let states = [Possession, Possession, Pass, Pass, Pass, Uncontrolled, Possession];
        let runs = label_runs(&states);
        assert_eq!(
            runs,
            vec![
                (Possession, 0..2),
                (Pass, 2..5),
                (Uncontrolled, 5..6),
                (Possession, 6..7),
            ]
        );
        assert!(label_runs(&[]).is_empty());
    }

    #[test]
    fn center_maps_to_origin() {
        let pitch = PitchSpec::default();
        let mut seq = toy_sequence(0, 2, 2, 0, 1);
        seq.positions[[0, 0, 0]] = 0.0;
        seq.positions[[0, 0, 1]] = 0.0;
        let norm = normalize_sequence(&seq, &pitch).unwrap();
        assert_eq!(norm.positions[[0, 0, 0]], 0.0);
        assert_eq!(norm.positions[[0, 0, 1]], 0.0);
    }

    #[test]
    fn corner_maps_to_unit_corner() {
        let pitch = PitchSpec::default();
        let mut seq = toy_sequence(0, 2, 2, 0, 2);
        seq.positions[[0, 0, 0]] = 52.5;
        seq.positions[[0, 0, 1]] = 34.0;
        let norm = normalize_sequence(&seq, &pitch).unwrap();
        assert_eq!(norm.positions[[0, 0, 0]], 1.0);
        assert_eq!(norm.positions[[0, 0, 1]], 1.0);
    }

    #[test]
    fn normalize_roundtrip_is_identity_within_tolerance() {
        let pitch = PitchSpec::default();
        for seed in 0..100 {
            let seq = toy_sequence(seed, 6, 5, 3, seed);
            let back =
                denormalize_sequence(&normalize_sequence(&seq, &pitch).unwrap(), &pitch).unwrap();
            for (a, b) in seq.positions.iter().zip(back.positions.iter()) {
                assert!((a - b).abs() < 1e-9, "positions differ: {a} vs {b}");
            }
            for (a, b) in seq.ball_positions.iter().zip(back.ball_positions.iter()) {
                assert!((a - b).abs() < 1e-9, "ball differs: {a} vs {b}");
            }
        }
    }

    #[test]
    fn normalize_rejects_non_finite_with_indices() {
        let pitch = PitchSpec::default();
        let mut seq = toy_sequence(0, 4, 3, 0, 3);
        seq.positions[[2, 1, 0]] = f64::NAN;
        match normalize_sequence(&seq, &pitch) {
            Err(DataError::NonFinite { frame: 2, agent: 1 }) => {}
            other => panic!("expected NonFinite{{2,1}}, got {other:?}"),
        }
    }

    #[test]
    fn pad_appends_invalid_agents() {
        let seq = toy_sequence(0, 4, 21, 2, 4);
        let padded = pad_to(&seq, 22).unwrap();
        assert_eq!(padded.n_agents(), 22);
        assert_eq!(padded.agent_valid.iter().filter(|v| !**v).count(), 1);
        assert!(!padded.agent_valid[21]);
        assert_eq!(padded.player_types.row(21).sum(), 0.0);
        assert!(!padded.crop_present.column(21).iter().any(|p| *p));
        // labels untouched
        assert_eq!(padded.ball_states, seq.ball_states);
        assert_eq!(padded.possessor, seq.possessor);
    }

    #[test]
    fn pad_identity_when_full() {
        let seq = toy_sequence(0, 4, 22, 2, 5);
        let padded = pad_to(&seq, 22).unwrap();
        assert_eq!(padded, seq);
    }

    #[test]
    fn pad_rejects_too_small() {
        let seq = toy_sequence(0, 4, 5, 0, 6);
        assert!(matches!(
            pad_to(&seq, 4),
            Err(DataError::PadTooSmall { n: 5, n_max: 4 })
        ));
    }

    #[test]
    fn validate_accepts_toy_and_rejects_bad_possessor() {
        let pitch = PitchSpec::default();
        let mut seq = toy_sequence(0, 4, 5, 2, 7);
        seq.validate(&pitch).unwrap();
        seq.possessor[1] = 9;
        assert!(seq.validate(&pitch).is_err());
    }

    #[test]
    fn validate_rejects_padding_possessor() {
        let pitch = PitchSpec::default();
        let seq = toy_sequence(0, 4, 5, 2, 8);
        let mut padded = pad_to(&seq, 6).unwrap();
        padded.possessor[0] = 5;
        assert!(padded.validate(&pitch).is_err());
    }

    proptest! {
        #[test]
        fn pad_never_alters_valid_slots(n in 2usize..8, extra in 0usize..4, seed in 0u64..1000) {
            let seq = toy_sequence(seed, 5, n, 3, seed);
            let padded = pad_to(&seq, n + extra).unwrap();
            for frame in 0..seq.n_frames() {
                for agent in 0..n {
                    prop_assert_eq!(seq.positions[[frame, agent, 0]], padded.positions[[frame, agent, 0]]);
                    prop_assert_eq!(seq.positions[[frame, agent, 1]], padded.positions[[frame, agent, 1]]);
                    prop_assert_eq!(seq.crop_present[[frame, agent]], padded.crop_present[[frame, agent]]);
                    for k in 0..seq.crop_dim() {
                        prop_assert_eq!(seq.crop_features[[frame, agent, k]], padded.crop_features[[frame, agent, k]]);
                    }
                }
            }
        }

        #[test]
        fn normalize_roundtrip_property(seed in 0u64..500) {
            let pitch = PitchSpec::default();
            let seq = toy_sequence(seed, 4, 3, 2, seed.wrapping_add(77));
            let back = denormalize_sequence(&normalize_sequence(&seq, &pitch).unwrap(), &pitch).unwrap();
            for (a, b) in seq.positions.iter().zip(back.positions.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
