use std::io::{Read, Write};
use std::path::Path;

use crate::losses::{DataBounds, DataPoint};
use crate::{Error, Result};

use super::{Op, Update};

/// A multiset of points that remembers its initial size.
///
/// Updates that would take the size below half of the initial size are
/// rejected with [`Error::DatasetFloor`].
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
    dim: usize,
    initial_len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateEffect {
    Added,
    /// One copy removed; `multiplicity` counts copies present before removal.
    Removed { multiplicity: usize },
    /// Delete of a point not in the dataset.
    Absent,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>, dim: usize) -> Result<Self> {
        let n = points.len();
        Self::with_initial_len(points, dim, n)
    }

    /// Rebuilds a dataset mid-sequence, e.g. from a snapshot.
    pub fn with_initial_len(points: Vec<DataPoint>, dim: usize, initial_len: usize) -> Result<Self> {
        if let Some(z) = points.iter().find(|z| z.dim() != dim) {
            return Err(Error::Dimension { expected: dim, found: z.dim() });
        }
        let ds = Dataset { points, dim, initial_len };
        if !ds.respects_floor(ds.len()) {
            return Err(Error::DatasetFloor { initial: initial_len, after: ds.len() });
        }
        Ok(ds)
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<DataPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial_len(&self) -> usize {
        self.initial_len
    }

    pub fn multiplicity(&self, z: &DataPoint) -> usize {
        self.points.iter().filter(|p| *p == z).count()
    }

    fn respects_floor(&self, len: usize) -> bool {
        2 * len >= self.initial_len
    }

    /// Applies one update in place.
    pub fn apply(&mut self, u: &Update) -> Result<UpdateEffect> {
        if u.point.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: u.point.dim() });
        }
        match u.op {
            Op::Add => {
                self.points.push(u.point.clone());
                Ok(UpdateEffect::Added)
            }
            Op::Delete => {
                let multiplicity = self.multiplicity(&u.point);
                if multiplicity == 0 {
                    return Ok(UpdateEffect::Absent);
                }
                if !self.respects_floor(self.len() - 1) {
                    return Err(Error::DatasetFloor { initial: self.initial_len, after: self.len() - 1 });
                }
                let idx = self.points.iter().rposition(|p| *p == u.point).expect("present");
                self.points.remove(idx);
                Ok(UpdateEffect::Removed { multiplicity })
            }
        }
    }

    /// Persistent-style variant of [`Dataset::apply`].
    pub fn apply_update(&self, u: &Update) -> Result<Dataset> {
        let mut next = self.clone();
        next.apply(u)?;
        Ok(next)
    }

    /// Reads a CSV with header `x_1,…,x_d,y`, validating every row against `bounds`.
    pub fn read_csv(path: &Path, bounds: &DataBounds) -> Result<Dataset> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, bounds)
    }

    pub fn from_csv_reader<R: Read>(reader: R, bounds: &DataBounds) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let cols = header.len();
        let well_formed = cols >= 2
            && header.get(cols - 1) == Some("y")
            && (0..cols - 1).all(|j| header.get(j) == Some(format!("x_{}", j + 1).as_str()));
        if !well_formed {
            return Err(Error::Config(format!("dataset header must be x_1..x_d,y, found {:?}", header)));
        }
        let dim = cols - 1;
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("row {}: {e}", row + 1)))?;
            let (y, x) = vals.split_last().expect("at least two columns");
            let z = DataPoint::new(x.to_vec(), *y);
            bounds.check(&z).map_err(|e| Error::Config(format!("row {}: {e}", row + 1)))?;
            points.push(z);
        }
        Dataset::new(points, dim)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_csv_writer(file)
    }

    /// Writes with 17 significant digits, which round-trips every `f64`.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x_{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for z in &self.points {
            let row: Vec<String> = z.x.iter().chain(std::iter::once(&z.y)).map(|v| format!("{v:.16e}")).collect();
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
