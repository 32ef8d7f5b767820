//! Sequence-level smoothing of per-frame estimates and the temporal
//! consistency metric. Frame-to-frame warps are yaw rotations of the
//! environment induced by camera yaw.

use crate::error::{Error, Result};
use crate::radiometry::{rotate_env, LatLongMap};

/// One frame's environment estimate in its own (frame-local) orientation,
/// with the known yaw that aligns it to the world.
#[derive(Debug, Clone)]
pub struct FrameEstimate {
    pub index: usize,
    pub env: LatLongMap,
    pub yaw_to_world: f64,
}

/// Temporal smoothness of a consecutive pair: the mean squared difference
/// between frame a and frame b warped into a's orientation.
pub fn temporal_loss(a: &FrameEstimate, b: &FrameEstimate) -> Result<f64> {
    if a.env.width != b.env.width || a.env.height != b.env.height {
        return Err(Error::ResolutionMismatch {
            left: format!("{}x{}", a.env.width, a.env.height),
            right: format!("{}x{}", b.env.width, b.env.height),
            context: "temporal_loss",
        });
    }
    let warped = rotate_env(&b.env, b.yaw_to_world - a.yaw_to_world);
    let n = a.env.data.len();
    let mut acc = 0.0f64;
    for i in 0..n {
        let d = a.env.data[i] as f64 - warped.data[i] as f64;
        acc += d * d;
    }
    Ok(acc / n as f64)
}

/// Exponential moving average over the sequence, folded in each frame's own
/// orientation: the previous smoothed state is warped into the current frame
/// before blending. alpha = 1 returns the input unchanged.
pub fn smooth_sequence(estimates: &[FrameEstimate], alpha: f64) -> Result<Vec<FrameEstimate>> {
    if estimates.is_empty() {
        return Err(Error::Empty("frame sequence"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::contract("alpha must lie in [0, 1]"));
    }
    for pair in estimates.windows(2) {
        if pair[1].index <= pair[0].index {
            return Err(Error::contract("frame indices must strictly increase"));
        }
        if pair[1].env.width != pair[0].env.width || pair[1].env.height != pair[0].env.height {
            return Err(Error::ResolutionMismatch {
                left: format!("{}x{}", pair[0].env.width, pair[0].env.height),
                right: format!("{}x{}", pair[1].env.width, pair[1].env.height),
                context: "smooth_sequence",
            });
        }
    }
    if alpha == 1.0 {
        return Ok(estimates.to_vec());
    }
    let mut out: Vec<FrameEstimate> = Vec::with_capacity(estimates.len());
    out.push(estimates[0].clone());
    for i in 1..estimates.len() {
        let prev = &out[i - 1];
        let cur = &estimates[i];
        let prev_in_cur = rotate_env(&prev.env, prev.yaw_to_world - cur.yaw_to_world);
        let mut data = vec![0.0f32; cur.env.data.len()];
        for (j, v) in data.iter_mut().enumerate() {
            *v = ((alpha * cur.env.data[j] as f64)
                + ((1.0 - alpha) * prev_in_cur.data[j] as f64))
                .max(0.0) as f32;
        }
        out.push(FrameEstimate {
            index: cur.index,
            env: LatLongMap::from_data(cur.env.width, cur.env.height, data)?,
            yaw_to_world: cur.yaw_to_world,
        });
    }
    Ok(out)
}

/// Mean temporal loss over consecutive pairs of a sequence.
pub fn mean_consecutive_loss(frames: &[FrameEstimate]) -> Result<f64> {
    if frames.len() < 2 {
        return Ok(0.0);
    }
    let mut acc = 0.0f64;
    for pair in frames.windows(2) {
        acc += temporal_loss(&pair[0], &pair[1])?;
    }
    Ok(acc / (frames.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_map(w: usize, h: usize, seed: u64) -> LatLongMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * 3).map(|_| rng.gen_range(0.0..1.5)).collect();
        LatLongMap::from_data(w, h, data).unwrap()
    }

    #[test]
    fn identical_frames_have_zero_loss() {
        let env = random_map(64, 32, 1);
        let a = FrameEstimate {
            index: 0,
            env: env.clone(),
            yaw_to_world: 0.0,
        };
        let b = FrameEstimate {
            index: 1,
            env,
            yaw_to_world: 0.0,
        };
        assert_eq!(temporal_loss(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn matching_rotation_cancels_exactly() {
        let env = random_map(64, 32, 2);
        // A shift-exact yaw: 5 columns.
        let phi = TAU * 5.0 / 64.0;
        let a = FrameEstimate {
            index: 0,
            env: env.clone(),
            yaw_to_world: phi,
        };
        let b = FrameEstimate {
            index: 1,
            env: rotate_env(&env, phi),
            yaw_to_world: 0.0,
        };
        // b in a's orientation: rotate by yaw_b - yaw_a = -phi, undoing the shift.
        assert_eq!(temporal_loss(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn loss_against_black_is_mean_square() {
        let env = random_map(64, 32, 3);
        let expected: f64 = env.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>()
            / env.data.len() as f64;
        let a = FrameEstimate {
            index: 0,
            env: LatLongMap::zeros(64, 32).unwrap(),
            yaw_to_world: 0.0,
        };
        let b = FrameEstimate {
            index: 1,
            env,
            yaw_to_world: 0.0,
        };
        let loss = temporal_loss(&a, &b).unwrap();
        assert!((loss - expected).abs() < 1e-9 * expected.max(1.0));
    }

    #[test]
    fn alpha_one_is_identity() {
        let frames: Vec<FrameEstimate> = (0..4)
            .map(|i| FrameEstimate {
                index: i,
                env: random_map(32, 16, i as u64),
                yaw_to_world: 0.1 * i as f64,
            })
            .collect();
        let smoothed = smooth_sequence(&frames, 1.0).unwrap();
        for (a, b) in frames.iter().zip(smoothed.iter()) {
            assert_eq!(a.env.data, b.env.data);
        }
    }

    #[test]
    fn single_frame_is_unchanged() {
        let frames = vec![FrameEstimate {
            index: 3,
            env: random_map(32, 16, 9),
            yaw_to_world: 0.4,
        }];
        let smoothed = smooth_sequence(&frames, 0.3).unwrap();
        assert_eq!(smoothed.len(), 1);
        assert_eq!(smoothed[0].env.data, frames[0].env.data);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        assert!(matches!(
            smooth_sequence(&[], 0.3),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn smoothing_reduces_noise_under_static_light() {
        let (w, h) = (64usize, 32usize);
        let world = random_map(w, h, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Rotating camera, static world light, additive per-frame noise.
        let frames: Vec<FrameEstimate> = (0..10)
            .map(|i| {
                let yaw = TAU * (i * 3) as f64 / w as f64; // shift-exact steps
                let clean = rotate_env(&world, -yaw);
                let data: Vec<f32> = clean
                    .data
                    .iter()
                    .map(|&v| (v + rng.gen_range(-0.2..0.2f32)).max(0.0))
                    .collect();
                FrameEstimate {
                    index: i,
                    env: LatLongMap::from_data(w, h, data).unwrap(),
                    yaw_to_world: yaw,
                }
            })
            .collect();
        let raw = mean_consecutive_loss(&frames).unwrap();
        let smoothed = smooth_sequence(&frames, 0.3).unwrap();
        let after = mean_consecutive_loss(&smoothed).unwrap();
        assert!(
            after < raw,
            "smoothing did not reduce the loss: {raw} -> {after}"
        );
    }

    #[test]
    fn non_increasing_indices_are_rejected() {
        let frames = vec![
            FrameEstimate {
                index: 2,
                env: random_map(32, 16, 1),
                yaw_to_world: 0.0,
            },
            FrameEstimate {
                index: 2,
                env: random_map(32, 16, 2),
                yaw_to_world: 0.0,
            },
        ];
        assert!(smooth_sequence(&frames, 0.5).is_err());
    }
}
