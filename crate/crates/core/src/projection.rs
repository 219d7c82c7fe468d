//! Linear projections from sparse bag-of-words space into the shared
//! low-dimensional representation, plus their on-disk TSV format.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::vectorizer::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionMethod {
    Scl,
    Dci,
}

impl ProjectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionMethod::Scl => "scl",
            ProjectionMethod::Dci => "dci",
        }
    }
}

impl fmt::Display for ProjectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scl" => Ok(ProjectionMethod::Scl),
            "dci" => Ok(ProjectionMethod::Dci),
            other => Err(Error::InvalidInput(format!(
                "unknown projection method '{other}'"
            ))),
        }
    }
}

/// A `|V| x L` projection. Rows are indexed by vocabulary position in the
/// tagged language; `x.T @ matrix` maps a document into L dimensions.
#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    pub matrix: Matrix,
    pub language: String,
    pub method: ProjectionMethod,
}

impl ProjectionMatrix {
    pub fn new(matrix: Matrix, method: ProjectionMethod, language: impl Into<String>) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidInput(
                "projection matrix contains non-finite entries".into(),
            ));
        }
        Ok(ProjectionMatrix {
            matrix,
            language: language.into(),
            method,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    /// Output dimensionality L.
    pub fn dims(&self) -> usize {
        self.matrix.cols()
    }

    /// Project a sparse vector: returns `xᵀθ` as a dense vector of length L.
    ///
    /// Exactly linear in `x`; the zero vector maps to the zero output and a
    /// unit vector `e_i` returns row `i`.
    pub fn project(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if let Some(max) = x.max_index() {
            if max >= self.matrix.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "sparse index {max} out of range for projection with {} rows",
                    self.matrix.rows()
                )));
            }
        }
        let mut out = vec![0.0; self.matrix.cols()];
        for &(idx, weight) in x.entries() {
            let row = self.matrix.row(idx);
            for (o, &v) in out.iter_mut().zip(row.iter()) {
                *o += weight * v;
            }
        }
        Ok(out)
    }

    /// Write the matrix as TSV with a `rows cols method language` header.
    /// Entries use the shortest round-tripping decimal form.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "{} {} {} {}",
            self.matrix.rows(),
            self.matrix.cols(),
            self.method,
            self.language
        )
        .map_err(|e| Error::io(path, e))?;
        for r in 0..self.matrix.rows() {
            let line = self
                .matrix
                .row(r)
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("\t");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();

        let header = lines
            .next()
            .ok_or_else(|| Error::Format(format!("empty projection file {}", path.display())))?
            .map_err(|e| Error::io(path, e))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                line: 1,
                msg: "projection header must be 'rows cols method language'".into(),
            });
        }
        let rows: usize = parts[0].parse().map_err(|_| Error::Parse {
            line: 1,
            msg: format!("bad row count '{}'", parts[0]),
        })?;
        let cols: usize = parts[1].parse().map_err(|_| Error::Parse {
            line: 1,
            msg: format!("bad column count '{}'", parts[1]),
        })?;
        let method: ProjectionMethod = parts[2].parse()?;
        let language = parts[3].to_string();

        let mut data = Vec::with_capacity(rows * cols);
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            for field in line.split('\t') {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad matrix entry '{field}'"),
                })?;
                data.push(v);
            }
        }
        let matrix = Matrix::from_vec(rows, cols, data)?;
        ProjectionMatrix::new(matrix, method, language)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_projection(rows: usize, cols: usize, seed: u64) -> ProjectionMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        ProjectionMatrix::new(
            Matrix::from_vec(rows, cols, data).unwrap(),
            ProjectionMethod::Scl,
            "src+tgt",
        )
        .unwrap()
    }

    /// Dense reference: materialize x and do the full mat-vec.
    fn dense_project(theta: &ProjectionMatrix, x: &SparseVector) -> Vec<f64> {
        let mut dense = vec![0.0; theta.rows()];
        for &(i, w) in x.entries() {
            dense[i] = w;
        }
        let mut out = vec![0.0; theta.dims()];
        for (r, &xv) in dense.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += xv * theta.matrix.get(r, c);
            }
        }
        out
    }

    #[test]
    fn zero_vector_projects_to_zero() {
        let theta = random_projection(6, 3, 1);
        let out = theta.project(&SparseVector::zero()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_vector_projects_to_its_row() {
        let theta = random_projection(6, 3, 2);
        let e4 = SparseVector::new(vec![(4, 1.0)]).unwrap();
        let out = theta.project(&e4).unwrap();
        assert_eq!(out, theta.matrix.row(4).to_vec());
    }

    #[test]
    fn two_entry_vector_matches_dense_oracle() {
        let theta = random_projection(8, 4, 3);
        let x = SparseVector::new(vec![(1, 0.5), (6, -1.25)]).unwrap();
        let ours = theta.project(&x).unwrap();
        let oracle = dense_project(&theta, &x);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        let theta = random_projection(4, 2, 4);
        let x = SparseVector::new(vec![(4, 1.0)]).unwrap();
        assert!(theta.project(&x).is_err());
    }

    #[test]
    fn tsv_round_trips_exactly() {
        let theta = random_projection(5, 3, 9);
        let f = tempfile::NamedTempFile::new().unwrap();
        theta.write_tsv(f.path()).unwrap();
        let back = ProjectionMatrix::read_tsv(f.path()).unwrap();
        assert_eq!(back.method, theta.method);
        assert_eq!(back.language, theta.language);
        assert_eq!(back.matrix, theta.matrix);
    }

    #[test]
    fn tsv_reader_rejects_corrupt_files() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "2 2 scl\n1\t0\n0\t1\n").unwrap();
        assert!(matches!(
            ProjectionMatrix::read_tsv(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
        std::fs::write(f.path(), "2 2 scl en\n1\t0\n0\tx\n").unwrap();
        assert!(matches!(
            ProjectionMatrix::read_tsv(f.path()),
            Err(Error::Parse { line: 3, .. })
        ));
        std::fs::write(f.path(), "2 2 scl en\n1\t0\n").unwrap();
        assert!(ProjectionMatrix::read_tsv(f.path()).is_err());
    }

    proptest! {
        /// project(a*x + b*y) = a*project(x) + b*project(y), checked via a
        /// merged sparse combination against the dense route.
        #[test]
        fn projection_is_linear(
            xs in proptest::collection::btree_map(0usize..10, -3.0f64..3.0, 1..6),
            ys in proptest::collection::btree_map(0usize..10, -3.0f64..3.0, 1..6),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let theta = random_projection(10, 4, 7);
            let to_sparse = |m: &std::collections::BTreeMap<usize, f64>| {
                SparseVector::new(
                    m.iter()
                        .filter(|(_, &w)| w != 0.0)
                        .map(|(&i, &w)| (i, w))
                        .collect(),
                )
                .unwrap()
            };
            let x = to_sparse(&xs);
            let y = to_sparse(&ys);

            let mut combined: std::collections::BTreeMap<usize, f64> =
                xs.iter().map(|(&i, &w)| (i, a * w)).collect();
            for (&i, &w) in &ys {
                *combined.entry(i).or_insert(0.0) += b * w;
            }
            let z = to_sparse(&combined);

            let px = theta.project(&x).unwrap();
            let py = theta.project(&y).unwrap();
            let pz = theta.project(&z).unwrap();
            for ((zv, xv), yv) in pz.iter().zip(&px).zip(&py) {
                let expected = a * xv + b * yv;
                let scale = expected.abs().max(1.0);
                prop_assert!((zv - expected).abs() <= 1e-9 * scale);
            }
        }
    }
}
