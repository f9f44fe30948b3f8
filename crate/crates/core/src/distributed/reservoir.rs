use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::losses::DataPoint;
use crate::rng::NamedRng;
use crate::{Error, Result};

pub type PointId = u32;

/// Interns points by exact value so subsamples can hold small ids.
#[derive(Clone, Debug, Default)]
pub struct PointStore {
    points: Vec<DataPoint>,
    index: HashMap<Vec<u64>, PointId>,
}

fn key(z: &DataPoint) -> Vec<u64> {
    // `+ 0.0` folds −0.0 onto 0.0 so the key agrees with `==`.
    z.x.iter().chain(std::iter::once(&z.y)).map(|v| (v + 0.0).to_bits()).collect()
}

impl PointStore {
    pub fn intern(&mut self, z: &DataPoint) -> PointId {
        let k = key(z);
        if let Some(&id) = self.index.get(&k) {
            return id;
        }
        let id = self.points.len() as PointId;
        self.points.push(z.clone());
        self.index.insert(k, id);
        id
    }

    pub fn lookup(&self, z: &DataPoint) -> Option<PointId> {
        self.index.get(&key(z)).copied()
    }

    pub fn get(&self, id: PointId) -> &DataPoint {
        &self.points[id as usize]
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn from_points(points: Vec<DataPoint>) -> Self {
        let mut store = PointStore::default();
        for z in &points {
            store.intern(z);
        }
        store
    }
}

/// Effect of an update on the dataset, in store ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Change {
    Added(PointId),
    /// One copy of `id` removed; `multiplicity` copies were present before.
    Deleted { id: PointId, multiplicity: usize },
    Absent,
}

/// Edits a bootstrap sample so it stays i.i.d. uniform over the updated dataset.
///
/// * Add: `N ~ Binomial(B, 1/n_i)` distinct positions take the new point.
/// * Delete: each position holding the deleted value is redrawn from the
///   updated dataset with probability `1/k`, where `k` is the number of
///   copies of that value before the delete (always, for distinct points).
///
/// `pool` lists the updated dataset, one id per copy. Returns the positions
/// whose content changed, in increasing order.
pub fn reservoir_update(positions: &mut [PointId], change: Change, pool: &[PointId], rng: &mut NamedRng) -> Result<Vec<usize>> {
    let b = positions.len();
    match change {
        Change::Absent => Ok(Vec::new()),
        Change::Added(id) => {
            if pool.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let draw = Binomial::new(b as u64, 1.0 / pool.len() as f64)
                .map_err(|e| Error::invalid("binomial", e.to_string()))?
                .sample(&mut rng.rng) as usize;
            if draw > b {
                log::warn!("binomial draw {draw} capped at {b}");
            }
            let mut chosen = sample(&mut rng.rng, b, draw.min(b)).into_vec();
            chosen.sort_unstable();
            chosen.retain(|&p| positions[p] != id);
            for &p in &chosen {
                positions[p] = id;
            }
            Ok(chosen)
        }
        Change::Deleted { id, multiplicity } => {
            if pool.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let mut changed = Vec::new();
            for (p, slot) in positions.iter_mut().enumerate() {
                if *slot != id {
                    continue;
                }
                if multiplicity > 1 && rng.rng.random::<f64>() >= 1.0 / multiplicity as f64 {
                    continue;
                }
                let fresh = pool[rng.rng.random_range(0..pool.len())];
                if fresh != *slot {
                    *slot = fresh;
                    changed.push(p);
                }
            }
            Ok(changed)
        }
    }
}
