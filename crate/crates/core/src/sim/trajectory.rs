use std::io::{self, Write};
use std::ops::Range;

/// Uniformly sampled, column-labelled time series. Row `k` is at `k·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    dt: f64,
    labels: Vec<String>,
    groups: Vec<(String, Range<usize>)>,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, groups: Vec<(String, Vec<String>)>) -> Self {
        let mut labels = Vec::new();
        let mut ranges = Vec::new();
        for (name, cols) in groups {
            let start = labels.len();
            labels.extend(cols);
            ranges.push((name, start..labels.len()));
        }
        Self {
            dt,
            labels,
            groups: ranges,
            data: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width(), "row width mismatch");
        self.data.extend_from_slice(row);
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn width(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        if self.labels.is_empty() {
            0
        } else {
            self.data.len() / self.labels.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.width();
        &self.data[k * w..(k + 1) * w]
    }

    pub fn last_row(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn group_names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|(n, _)| n.as_str())
    }

    pub fn group_range(&self, name: &str) -> Option<Range<usize>> {
        self.groups
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.clone())
    }

    /// Values of a signal group at row `k`.
    pub fn group(&self, name: &str, k: usize) -> Option<&[f64]> {
        self.group_range(name).map(|r| &self.row(k)[r])
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let c = self.labels.iter().position(|l| l == label)?;
        Some((0..self.len()).map(|k| self.row(k)[c]).collect())
    }

    /// CSV with a leading `t` column and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        self.write_csv_strided(w, 1)
    }

    /// Like [`Trajectory::write_csv`] but keeps only every `stride`-th sample.
    pub fn write_csv_strided<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        let stride = stride.max(1);
        write!(w, "t")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for k in (0..self.len()).step_by(stride) {
            write!(w, "{:.16e}", self.time(k))?;
            for v in self.row(k) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_partition_columns() {
        let mut tr = Trajectory::new(
            0.5,
            vec![
                ("a".into(), vec!["a0".into(), "a1".into()]),
                ("b".into(), vec!["b0".into()]),
            ],
        );
        tr.push_row(&[1.0, 2.0, 3.0]);
        tr.push_row(&[4.0, 5.0, 6.0]);
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.group("a", 1).unwrap(), &[4.0, 5.0]);
        assert_eq!(tr.group("b", 0).unwrap(), &[3.0]);
        assert_eq!(tr.column("b0").unwrap(), vec![3.0, 6.0]);
        assert_eq!(tr.time(1), 0.5);
    }

    #[test]
    fn csv_uses_full_precision() {
        let mut tr = Trajectory::new(0.1, vec![("x".into(), vec!["x".into()])]);
        tr.push_row(&[1.0 / 3.0]);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x");
        let row = lines.next().unwrap();
        let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
    }
}
