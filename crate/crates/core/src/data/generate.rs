use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm};
use crate::losses::{DataBounds, DataPoint};
use crate::rng::NamedRng;
use crate::{Error, Result};

use super::{Dataset, SequenceKind, Update, UpdateSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum Model {
    /// `y = wᵀx + noise·N(0,1)`, clipped to the label bound; `‖w‖ = R_y/(2R_x)`.
    Linear { noise: f64 },
    /// `P(y = +1) = sigmoid(wᵀx)`; `‖w‖ = 4/R_x`.
    Logistic,
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub weights: Vec<f64>,
}

/// Uniform point in the ball of radius `r`, never outside it after rounding.
fn uniform_in_ball(d: usize, r: f64, rng: &mut NamedRng) -> Vec<f64> {
    let radius = r * rng.rng.random::<f64>().powf(1.0 / d as f64);
    on_sphere(d, radius, rng)
}

fn on_sphere(d: usize, r: f64, rng: &mut NamedRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.rng.sample(StandardNormal)).collect();
        let ng = norm(&g);
        if ng == 0.0 {
            continue;
        }
        let mut x: Vec<f64> = g.iter().map(|v| v * r / ng).collect();
        if norm(&x) > r {
            x.iter_mut().for_each(|v| *v *= 1.0 - 4.0 * f64::EPSILON);
        }
        return x;
    }
}

pub fn gen_synthetic_dataset(n: usize, d: usize, model: Model, bounds: &DataBounds, rng: &mut NamedRng) -> Result<Synthetic> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n, d", "must both be at least 1"));
    }
    let rx = bounds.feature_radius;
    let w_norm = match model {
        Model::Linear { .. } => bounds.label_bound / (2.0 * rx),
        Model::Logistic => 4.0 / rx,
    };
    let weights = on_sphere(d, w_norm, rng);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x = uniform_in_ball(d, rx, rng);
        let t = dot(&weights, &x);
        let y = match model {
            Model::Linear { noise } => {
                let e: f64 = rng.rng.sample(StandardNormal);
                (t + noise * e).clamp(-bounds.label_bound, bounds.label_bound)
            }
            Model::Logistic => {
                let p = 1.0 / (1.0 + (-t).exp());
                if rng.rng.random::<f64>() < p { 1.0 } else { -1.0 }
            }
        };
        points.push(DataPoint::new(x, y));
    }
    Ok(Synthetic { dataset: Dataset::new(points, d)?, weights })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Real,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Coin-flip adds of fresh points and deletes of uniformly chosen points.
    Random,
    /// Alternates adding a maximal-influence point (`‖x‖ = R_x`, `|y| = R_y`)
    /// with deleting the most influential point added before it.
    Churn,
    /// Walks the dataset flipping labels: delete `(x, y)`, then add `(x, −y)`.
    Drift,
    /// Deletes only; fails if the sequence cannot respect the floor.
    Deletes,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "churn" => Ok(Strategy::Churn),
            "drift" => Ok(Strategy::Drift),
            "deletes" => Ok(Strategy::Deletes),
            other => Err(Error::invalid("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateSpec {
    pub length: usize,
    pub strategy: Strategy,
    pub bounds: DataBounds,
    pub labels: LabelKind,
}

fn influence(z: &DataPoint) -> f64 {
    norm(&z.x) * z.y.abs()
}

fn fresh_label(spec: &UpdateSpec, rng: &mut NamedRng) -> f64 {
    match spec.labels {
        LabelKind::Binary => if rng.rng.random::<bool>() { 1.0 } else { -1.0 },
        LabelKind::Real => rng.rng.random_range(-spec.bounds.label_bound..=spec.bounds.label_bound),
    }
}

fn extreme_label(spec: &UpdateSpec, rng: &mut NamedRng) -> f64 {
    let mag = match spec.labels {
        LabelKind::Binary => 1.0,
        LabelKind::Real => spec.bounds.label_bound,
    };
    if rng.rng.random::<bool>() { mag } else { -mag }
}

/// Builds a non-adaptive update sequence whose every prefix respects the
/// dataset floor, by simulating it against a copy of `data`.
pub fn gen_adversarial_sequence(data: &Dataset, spec: &UpdateSpec, rng: &mut NamedRng) -> Result<UpdateSequence> {
    let d = data.dim();
    let n0 = data.initial_len();
    let min_len = n0.div_ceil(2);
    let max_len = n0 + n0 / 2;
    let kind = match spec.strategy {
        Strategy::Random => SequenceKind::Random,
        Strategy::Churn => SequenceKind::Churn,
        Strategy::Drift => SequenceKind::Drift,
        Strategy::Deletes => SequenceKind::Deletes,
    };
    if spec.strategy == Strategy::Deletes && spec.length > data.len().saturating_sub(min_len) {
        return Err(Error::DatasetFloor { initial: n0, after: data.len().saturating_sub(spec.length) });
    }
    let mut sim = data.clone();
    let mut updates = Vec::with_capacity(spec.length);
    let mut last_added: Option<usize> = None;
    for step in 0..spec.length {
        let u = match spec.strategy {
            Strategy::Random => {
                let must_add = sim.len() <= min_len;
                let must_delete = sim.len() >= max_len;
                let add = !must_delete && (must_add || rng.rng.random::<bool>());
                if add {
                    let x = uniform_in_ball(d, spec.bounds.feature_radius, rng);
                    Update::add(DataPoint::new(x, fresh_label(spec, rng)))
                } else {
                    let i = rng.rng.random_range(0..sim.len());
                    Update::delete(sim.points()[i].clone())
                }
            }
            Strategy::Churn => {
                if step % 2 == 0 {
                    let x = on_sphere(d, spec.bounds.feature_radius, rng);
                    last_added = Some(sim.len());
                    Update::add(DataPoint::new(x, extreme_label(spec, rng)))
                } else {
                    let skip = last_added.take();
                    let target = sim
                        .points()
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| Some(*i) != skip)
                        .fold(None::<(usize, f64)>, |best, (i, z)| {
                            let s = influence(z);
                            match best {
                                Some((_, b)) if b >= s => best,
                                _ => Some((i, s)),
                            }
                        })
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    Update::delete(sim.points()[target].clone())
                }
            }
            Strategy::Drift => {
                let k = step / 2;
                if step % 2 == 0 {
                    Update::delete(sim.points()[k % sim.len()].clone())
                } else {
                    let prev = &updates.last().map(|u: &Update| u.point.clone()).expect("delete precedes add");
                    Update::add(DataPoint::new(prev.x.clone(), -prev.y))
                }
            }
            Strategy::Deletes => {
                let i = rng.rng.random_range(0..sim.len());
                Update::delete(sim.points()[i].clone())
            }
        };
        sim.apply(&u).map_err(|e| e.at_round(step + 1))?;
        updates.push(u);
    }
    Ok(UpdateSequence { kind, updates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Seeds, StreamKind};

    fn bounds() -> DataBounds {
        DataBounds::new(1.0, 1.0).unwrap()
    }

    fn base(n: usize, seed: u64) -> Dataset {
        let mut rng = Seeds::new(seed).stream(StreamKind::Data, 0);
        gen_synthetic_dataset(n, 3, Model::Linear { noise: 0.1 }, &bounds(), &mut rng).unwrap().dataset
    }

    fn spec(length: usize, strategy: Strategy) -> UpdateSpec {
        UpdateSpec { length, strategy, bounds: bounds(), labels: LabelKind::Real }
    }

    #[test]
    fn zero_length_gives_empty_sequence() {
        let mut rng = Seeds::new(1).stream(StreamKind::Updates, 0);
        assert!(gen_adversarial_sequence(&base(10, 1), &spec(0, Strategy::Churn), &mut rng).unwrap().is_empty());
    }

    #[test]
    fn too_many_deletes_rejected() {
        let d = base(10, 2);
        let mut rng = Seeds::new(2).stream(StreamKind::Updates, 0);
        assert!(gen_adversarial_sequence(&d, &spec(5, Strategy::Deletes), &mut rng).is_ok());
        assert!(matches!(
            gen_adversarial_sequence(&d, &spec(6, Strategy::Deletes), &mut rng),
            Err(Error::DatasetFloor { .. })
        ));
    }

    #[test]
    fn generated_points_respect_bounds() {
        let d = base(500, 3);
        assert!(d.points().iter().all(|z| bounds().check(z).is_ok()));
        let mut rng = Seeds::new(3).stream(StreamKind::Updates, 0);
        let seq = gen_adversarial_sequence(&d, &spec(200, Strategy::Churn), &mut rng).unwrap();
        assert!(seq.updates.iter().all(|u| bounds().check(&u.point).is_ok()));
        seq.validate_against(&d).unwrap();
    }

    #[test]
    fn drift_flips_labels_in_pairs() {
        let d = base(20, 4);
        let mut rng = Seeds::new(4).stream(StreamKind::Updates, 0);
        let seq = gen_adversarial_sequence(&d, &spec(6, Strategy::Drift), &mut rng).unwrap();
        for pair in seq.updates.chunks(2) {
            assert_eq!(pair[0].op, super::super::Op::Delete);
            assert_eq!(pair[1].point.x, pair[0].point.x);
            assert_eq!(pair[1].point.y, -pair[0].point.y);
        }
    }

    #[test]
    fn churn_adds_maximal_influence_points() {
        let d = base(30, 5);
        let mut rng = Seeds::new(5).stream(StreamKind::Updates, 0);
        let seq = gen_adversarial_sequence(&d, &spec(10, Strategy::Churn), &mut rng).unwrap();
        for u in seq.updates.iter().step_by(2) {
            assert!((influence(&u.point) - 1.0).abs() < 1e-12);
        }
    }
}
