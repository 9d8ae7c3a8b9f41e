//! Balanced panel container, CSV ingestion, and sample splitting.
//!
//! A [`Panel`] holds N units observed over T periods with d-dimensional
//! outcomes, stored dense with no missing cells. Period subsamples are
//! expressed as borrowed [`PanelView`]s, so the estimation and testing
//! samples share one allocation.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A balanced N x T x d panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    n_units: usize,
    n_periods: usize,
    dim: usize,
    // Indexed ((unit * T) + period) * d + dim.
    values: Vec<f64>,
    unit_labels: Vec<String>,
    period_labels: Vec<i64>,
}

impl Panel {
    /// Builds a panel from explicit labels and a dense value array laid out
    /// unit-major, then period, then dimension.
    pub fn from_parts(
        unit_labels: Vec<String>,
        period_labels: Vec<i64>,
        dim: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = unit_labels.len();
        let t = period_labels.len();
        if n < 2 {
            return Err(Error::InsufficientUnits { n, need: 2 });
        }
        if t < 2 {
            return Err(Error::PanelTooShort { t, need: 2 });
        }
        if dim == 0 {
            return Err(Error::DomainError("panel dimension must be >= 1".into()));
        }
        if values.len() != n * t * dim {
            return Err(Error::DomainError(format!(
                "value array has {} entries; {}x{}x{} panel needs {}",
                values.len(),
                n,
                t,
                dim,
                n * t * dim
            )));
        }
        if period_labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DomainError("period labels must be strictly increasing".into()));
        }
        {
            let mut seen = std::collections::HashSet::new();
            for label in &unit_labels {
                if !seen.insert(label.as_str()) {
                    return Err(Error::DomainError(format!("duplicate unit label `{label}`")));
                }
            }
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                let unit = idx / (t * dim);
                let period = (idx / dim) % t;
                return Err(Error::NonFiniteValue {
                    unit: unit_labels[unit].clone(),
                    period: period_labels[period],
                });
            }
        }
        Ok(Panel { n_units: n, n_periods: t, dim, values, unit_labels, period_labels })
    }

    /// Builds a panel with synthetic labels (`u1..uN`, periods `1..T`).
    pub fn from_values(n_units: usize, n_periods: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let unit_labels = (1..=n_units).map(|i| format!("u{i}")).collect();
        let period_labels = (1..=n_periods as i64).collect();
        Self::from_parts(unit_labels, period_labels, dim, values)
    }

    /// Reads a panel from long-format CSV with header `unit,period,y1,...,yd`.
    ///
    /// Units keep their order of first appearance; periods are sorted
    /// ascending regardless of row order. Every (unit, period) pair must
    /// appear exactly once.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::MalformedRow { line: 1, detail: e.to_string() })?
            .clone();
        if headers.len() < 3 || &headers[0] != "unit" || &headers[1] != "period" {
            return Err(Error::MalformedRow {
                line: 1,
                detail: format!("header must be `unit,period,y1,...`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let dim = headers.len() - 2;
        for j in 0..dim {
            let want = format!("y{}", j + 1);
            if &headers[j + 2] != want.as_str() {
                return Err(Error::MalformedRow {
                    line: 1,
                    detail: format!("outcome column {} must be named `{}`, got `{}`", j + 3, want, &headers[j + 2]),
                });
            }
        }

        let mut unit_order: Vec<String> = Vec::new();
        let mut unit_index: HashMap<String, usize> = HashMap::new();
        let mut periods: BTreeSet<i64> = BTreeSet::new();
        let mut cells: HashMap<(usize, i64), Vec<f64>> = HashMap::new();

        for item in rdr.records() {
            let record = match item {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(Error::MalformedRow { line, detail: e.to_string() });
                }
            };
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != dim + 2 {
                return Err(Error::MalformedRow {
                    line,
                    detail: format!("expected {} fields, got {}", dim + 2, record.len()),
                });
            }
            let unit = record[0].to_string();
            let period: i64 = record[1]
                .parse()
                .map_err(|_| Error::MalformedRow { line, detail: format!("period `{}` is not an integer", &record[1]) })?;
            let mut row = Vec::with_capacity(dim);
            for j in 0..dim {
                let v: f64 = record[j + 2]
                    .parse()
                    .map_err(|_| Error::MalformedRow { line, detail: format!("value `{}` is not a number", &record[j + 2]) })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { unit: unit.clone(), period });
                }
                row.push(v);
            }
            let uidx = *unit_index.entry(unit.clone()).or_insert_with(|| {
                unit_order.push(unit.clone());
                unit_order.len() - 1
            });
            periods.insert(period);
            if cells.insert((uidx, period), row).is_some() {
                return Err(Error::DuplicateCell { unit, period });
            }
        }

        let n = unit_order.len();
        let t = periods.len();
        if n < 2 {
            return Err(Error::InsufficientUnits { n, need: 2 });
        }
        if t < 2 {
            return Err(Error::PanelTooShort { t, need: 2 });
        }
        let period_labels: Vec<i64> = periods.into_iter().collect();
        let mut values = Vec::with_capacity(n * t * dim);
        for (uidx, unit) in unit_order.iter().enumerate() {
            for &p in &period_labels {
                match cells.get(&(uidx, p)) {
                    Some(row) => values.extend_from_slice(row),
                    None => {
                        return Err(Error::IncompletePanel { unit: unit.clone(), period: p });
                    }
                }
            }
        }
        Panel::from_parts(unit_order, period_labels, dim, values)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    /// Writes the panel back to the same long-format CSV. Values use the
    /// shortest decimal representation that round-trips exactly.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["unit".to_string(), "period".to_string()];
        header.extend((1..=self.dim).map(|j| format!("y{j}")));
        wtr.write_record(&header).map_err(csv_io)?;
        for i in 0..self.n_units {
            for tp in 0..self.n_periods {
                let mut row = vec![self.unit_labels[i].clone(), self.period_labels[tp].to_string()];
                for j in 0..self.dim {
                    row.push(format!("{}", self.value(i, tp, j)));
                }
                wtr.write_record(&row).map_err(csv_io)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unit_labels(&self) -> &[String] {
        &self.unit_labels
    }

    pub fn period_labels(&self) -> &[i64] {
        &self.period_labels
    }

    /// Value for `unit` at period position `period` (both 0-based), dimension `dim`.
    #[inline]
    pub fn value(&self, unit: usize, period: usize, dim: usize) -> f64 {
        self.values[(unit * self.n_periods + period) * self.dim + dim]
    }

    /// View over all T periods.
    pub fn full_view(&self) -> PanelView<'_> {
        PanelView { panel: self, positions: (0..self.n_periods).collect() }
    }

    /// View over the given 1-based period positions.
    pub fn view(&self, one_based: &[usize]) -> Result<PanelView<'_>> {
        if one_based.is_empty() {
            return Err(Error::InvalidSplit("empty period selection".into()));
        }
        let mut positions = Vec::with_capacity(one_based.len());
        for &ix in one_based {
            if ix == 0 || ix > self.n_periods {
                return Err(Error::InvalidSplit(format!(
                    "period index {ix} outside 1..={}",
                    self.n_periods
                )));
            }
            positions.push(ix - 1);
        }
        Ok(PanelView { panel: self, positions })
    }
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::DomainError(format!("CSV write error: {other:?}")),
    }
}

/// An explicit period split: 1-based indices for the estimation sample R
/// and the testing sample P.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    r_indices: Vec<usize>,
    p_indices: Vec<usize>,
    gap: usize,
}

impl SplitSpec {
    pub fn new(r_indices: Vec<usize>, p_indices: Vec<usize>) -> Result<Self> {
        Self::with_gap(r_indices, p_indices, 0)
    }

    pub fn with_gap(mut r_indices: Vec<usize>, mut p_indices: Vec<usize>, gap: usize) -> Result<Self> {
        r_indices.sort_unstable();
        p_indices.sort_unstable();
        for (name, ix) in [("R", &r_indices), ("P", &p_indices)] {
            if ix.is_empty() {
                return Err(Error::InvalidSplit(format!("sample {name} is empty")));
            }
            if ix[0] == 0 {
                return Err(Error::InvalidSplit(format!("sample {name} has index 0; indices are 1-based")));
            }
            if ix.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSplit(format!("sample {name} repeats an index")));
            }
        }
        let p_set: BTreeSet<usize> = p_indices.iter().copied().collect();
        if r_indices.iter().any(|ix| p_set.contains(ix)) {
            return Err(Error::InvalidSplit("samples R and P overlap".into()));
        }
        if gap > 0 && r_indices.last().unwrap() + gap >= p_indices[0] {
            return Err(Error::InvalidSplit(format!(
                "gap {gap} requires max(R) + gap < min(P)"
            )));
        }
        Ok(SplitSpec { r_indices, p_indices, gap })
    }

    pub fn r_indices(&self) -> &[usize] {
        &self.r_indices
    }

    pub fn p_indices(&self) -> &[usize] {
        &self.p_indices
    }

    pub fn gap(&self) -> usize {
        self.gap
    }
}

/// How to carve a panel's periods into the estimation and testing samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitMode {
    /// R is the first half of the periods, P the second. Odd T leaves the
    /// extra period in P.
    Halves,
    /// Like `Halves`, but the last M periods of R are dropped so P starts
    /// at least M + 1 periods after R ends.
    HalvesGap(usize),
    /// R takes the odd period positions, P the even ones.
    Interleaved,
    /// Use the given indices verbatim.
    Explicit(SplitSpec),
}

/// Resolves a split mode for a panel with `t` periods into 1-based index sets.
pub fn resolve_split(t: usize, mode: &SplitMode) -> Result<SplitSpec> {
    if t < 2 {
        return Err(Error::PanelTooShort { t, need: 2 });
    }
    match mode {
        SplitMode::Halves => {
            let h = t / 2;
            SplitSpec::new((1..=h).collect(), (h + 1..=t).collect())
        }
        SplitMode::HalvesGap(m) => {
            let h = t / 2;
            if h <= *m {
                return Err(Error::InvalidSplit(format!(
                    "gap {m} leaves no estimation periods out of {t}"
                )));
            }
            SplitSpec::with_gap((1..=h - m).collect(), (h + 1..=t).collect(), *m)
        }
        SplitMode::Interleaved => {
            SplitSpec::new((1..=t).step_by(2).collect(), (2..=t).step_by(2).collect())
        }
        SplitMode::Explicit(spec) => {
            if *spec.p_indices.last().unwrap() > t || *spec.r_indices.last().unwrap() > t {
                return Err(Error::InvalidSplit(format!("split index exceeds T = {t}")));
            }
            Ok(spec.clone())
        }
    }
}

/// Splits a panel into (R, P) views.
pub fn split_panel<'a>(panel: &'a Panel, mode: &SplitMode) -> Result<(PanelView<'a>, PanelView<'a>)> {
    let spec = resolve_split(panel.n_periods(), mode)?;
    Ok((panel.view(spec.r_indices())?, panel.view(spec.p_indices())?))
}

/// A read-only selection of periods from a panel.
#[derive(Debug, Clone)]
pub struct PanelView<'a> {
    panel: &'a Panel,
    // 0-based period positions, ascending for the built-in split modes.
    positions: Vec<usize>,
}

impl<'a> PanelView<'a> {
    pub fn panel(&self) -> &'a Panel {
        self.panel
    }

    pub fn n_units(&self) -> usize {
        self.panel.n_units
    }

    pub fn n_periods(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.panel.dim
    }

    /// 0-based positions into the parent panel's period axis.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Value for `unit` at the view's `k`-th period, dimension `dim`.
    #[inline]
    pub fn value(&self, unit: usize, k: usize, dim: usize) -> f64 {
        self.panel.value(unit, self.positions[k], dim)
    }

    /// Time averages per unit: row i is the mean of unit i over the view.
    pub fn unit_means(&self) -> DMatrix<f64> {
        let n = self.n_units();
        let d = self.dim();
        let len = self.positions.len() as f64;
        DMatrix::from_fn(n, d, |i, j| {
            let mut s = 0.0;
            for &p in &self.positions {
                s += self.panel.value(i, p, j);
            }
            s / len
        })
    }

    /// Unit means with each column z-scored across units (divisor N - 1).
    pub fn standardize(&self) -> Result<DMatrix<f64>> {
        standardize_columns(&self.unit_means())
    }
}

/// Z-scores each column of a matrix across rows, sample divisor N - 1.
pub fn standardize_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sd = var.sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::DegenerateAttribute { dim: j + 1 });
        }
        for i in 0..n {
            out[(i, j)] = (m[(i, j)] - mean) / sd;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_csv() -> &'static str {
        "unit,period,y1\na,1,1\na,2,2\nb,1,3\nb,2,4\n"
    }

    #[test]
    fn parses_small_panel() {
        let p = Panel::from_csv(small_csv().as_bytes()).unwrap();
        assert_eq!((p.n_units(), p.n_periods(), p.dim()), (2, 2, 1));
        assert_eq!(p.value(0, 0, 0), 1.0);
        assert_eq!(p.value(1, 1, 0), 4.0);
        assert_eq!(p.unit_labels(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn row_order_does_not_matter() {
        let shuffled = "unit,period,y1\nb,2,4\na,1,1\nb,1,3\na,2,2\n";
        let p = Panel::from_csv(shuffled.as_bytes()).unwrap();
        // Units by first appearance, periods ascending.
        assert_eq!(p.unit_labels(), &["b".to_string(), "a".to_string()]);
        assert_eq!(p.value(0, 0, 0), 3.0);
        assert_eq!(p.value(1, 1, 0), 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        let missing = "unit,period,y1\na,1,1\na,2,2\nb,1,3\n";
        assert!(matches!(
            Panel::from_csv(missing.as_bytes()),
            Err(Error::IncompletePanel { .. })
        ));
        let dup = "unit,period,y1\na,1,1\na,1,2\nb,1,3\nb,2,4\na,2,5\n";
        assert!(matches!(Panel::from_csv(dup.as_bytes()), Err(Error::DuplicateCell { .. })));
        let bad_header = "id,period,y1\na,1,1\n";
        assert!(matches!(Panel::from_csv(bad_header.as_bytes()), Err(Error::MalformedRow { line: 1, .. })));
        let bad_value = "unit,period,y1\na,1,x\na,2,2\nb,1,3\nb,2,4\n";
        assert!(matches!(Panel::from_csv(bad_value.as_bytes()), Err(Error::MalformedRow { .. })));
        let nan = "unit,period,y1\na,1,NaN\na,2,2\nb,1,3\nb,2,4\n";
        assert!(matches!(Panel::from_csv(nan.as_bytes()), Err(Error::NonFiniteValue { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let values = vec![0.1, 2.0 / 3.0, -1e-17, 3.25, 1234567.891011, 5e300, -0.3333333333333333, 42.0];
        let p = Panel::from_values(2, 2, 2, values).unwrap();
        let back = Panel::from_csv(p.to_csv_string().as_bytes()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn halves_and_interleaved_splits() {
        let p = Panel::from_values(2, 5, 1, (0..10).map(f64::from).collect()).unwrap();
        let (r, pv) = split_panel(&p, &SplitMode::Halves).unwrap();
        assert_eq!(r.positions(), &[0, 1]);
        assert_eq!(pv.positions(), &[2, 3, 4]);
        let (r, pv) = split_panel(&p, &SplitMode::Interleaved).unwrap();
        assert_eq!(r.positions(), &[0, 2, 4]);
        assert_eq!(pv.positions(), &[1, 3]);
        assert_eq!(r.n_periods() + pv.n_periods(), 5);
    }

    #[test]
    fn gap_split_drops_tail_of_r() {
        let p = Panel::from_values(2, 10, 1, (0..20).map(f64::from).collect()).unwrap();
        let (r, pv) = split_panel(&p, &SplitMode::HalvesGap(2)).unwrap();
        assert_eq!(r.positions(), &[0, 1, 2]);
        assert_eq!(pv.positions(), &[5, 6, 7, 8, 9]);
        // A gap that consumes all of R is rejected.
        let q = Panel::from_values(2, 4, 1, (0..8).map(f64::from).collect()).unwrap();
        assert!(matches!(split_panel(&q, &SplitMode::HalvesGap(2)), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn explicit_split_is_validated() {
        assert!(SplitSpec::new(vec![1, 2], vec![2, 3]).is_err());
        assert!(SplitSpec::new(vec![], vec![1]).is_err());
        assert!(SplitSpec::new(vec![0], vec![1]).is_err());
        assert!(SplitSpec::with_gap(vec![1, 2], vec![3], 1).is_err());
        assert!(SplitSpec::with_gap(vec![1, 2], vec![4], 1).is_ok());
        let p = Panel::from_values(2, 3, 1, (0..6).map(f64::from).collect()).unwrap();
        let spec = SplitSpec::new(vec![1], vec![2, 9]).unwrap();
        assert!(matches!(
            split_panel(&p, &SplitMode::Explicit(spec)),
            Err(Error::InvalidSplit(_))
        ));
    }

    #[test]
    fn unit_means_match_hand_arithmetic() {
        let p = Panel::from_values(3, 2, 1, vec![0.0, 2.0, 4.0, 6.0, 10.0, 10.0]).unwrap();
        let m = p.full_view().unit_means();
        assert_eq!(m.as_slice(), &[1.0, 5.0, 10.0]);
        // Weighted recombination of split means equals the full mean.
        let (r, pv) = split_panel(&p, &SplitMode::Halves).unwrap();
        let (mr, mp) = (r.unit_means(), pv.unit_means());
        for i in 0..3 {
            let w = (mr[(i, 0)] * r.n_periods() as f64 + mp[(i, 0)] * pv.n_periods() as f64)
                / p.n_periods() as f64;
            assert!((w - m[(i, 0)]).abs() < 1e-15);
        }
    }

    #[test]
    fn standardize_hits_unit_variance() {
        let p = Panel::from_values(2, 2, 1, vec![1.0, 1.0, 3.0, 3.0]).unwrap();
        let z = p.full_view().standardize().unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z[(0, 0)] + s).abs() < 1e-12);
        assert!((z[(1, 0)] - s).abs() < 1e-12);
        // Idempotent on z-scores, and exact moments.
        let z2 = standardize_columns(&z).unwrap();
        assert!((&z2 - &z).abs().max() < 1e-12);
        let mean = z.column(0).sum() / 2.0;
        assert!(mean.abs() < 1e-12);
        // Constant column cannot be standardized.
        let c = Panel::from_values(2, 2, 1, vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        assert!(matches!(c.full_view().standardize(), Err(Error::DegenerateAttribute { dim: 1 })));
    }
}
