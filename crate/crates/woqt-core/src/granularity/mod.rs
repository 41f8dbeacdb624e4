//! Group layouts: how many contiguous elements of a column share one scale.
//!
//! The coarseness ladder runs per-tensor (one scale for the whole matrix),
//! per-column (one scale per output channel), fixed power-of-two groups of
//! `B` rows within each column, and an adaptive mode that starts per-column
//! and halves the group size while sub-group value ranges differ too much
//! from their parent's.

pub mod policy;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Default smallest group size the adaptive search may reach.
pub const DEFAULT_MIN_GROUP: usize = 16;

/// Granularity family of a [`GroupLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    PerTensor,
    PerColumn,
    FixedGroup,
    Adaptive,
}

impl LayoutKind {
    pub fn as_u8(self) -> u8 {
        match self {
            LayoutKind::PerTensor => 0,
            LayoutKind::PerColumn => 1,
            LayoutKind::FixedGroup => 2,
            LayoutKind::Adaptive => 3,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => LayoutKind::PerTensor,
            1 => LayoutKind::PerColumn,
            2 => LayoutKind::FixedGroup,
            3 => LayoutKind::Adaptive,
            other => {
                return Err(Error::CorruptPayload(format!(
                    "unknown layout kind {other}"
                )))
            }
        })
    }
}

/// Partition of a `rows x cols` matrix into scale-sharing groups.
///
/// For every kind except `PerTensor`, each column is split into chunks of
/// `group_size` rows (the last chunk absorbs any remainder). `PerTensor`
/// treats the whole matrix as a single group with a single scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupLayout {
    kind: LayoutKind,
    rows: usize,
    cols: usize,
    group_size: usize,
    min_group: usize,
    /// Adaptive threshold recorded as round(alpha * 1000); 0 when non-adaptive.
    alpha_milli: u32,
}

impl GroupLayout {
    /// Per-tensor layout: one scale shared by the entire matrix.
    pub fn per_tensor(rows: usize, cols: usize) -> Self {
        Self {
            kind: LayoutKind::PerTensor,
            rows,
            cols,
            group_size: rows * cols,
            min_group: DEFAULT_MIN_GROUP,
            alpha_milli: 0,
        }
    }

    /// Per-column layout: one scale per output channel.
    pub fn per_column(rows: usize, cols: usize) -> Self {
        Self {
            kind: LayoutKind::PerColumn,
            rows,
            cols,
            group_size: rows,
            min_group: DEFAULT_MIN_GROUP,
            alpha_milli: 0,
        }
    }

    /// Fixed group layout with `group` rows per scale, validated against the
    /// shape: `group` must be a power of two in `min_group..=rows` that
    /// divides `rows` (or equal `rows`, the per-column degenerate case).
    pub fn fixed_group(rows: usize, cols: usize, group: usize, min_group: usize) -> Result<Self> {
        if group == rows {
            let mut l = Self::per_column(rows, cols);
            l.kind = LayoutKind::FixedGroup;
            l.min_group = min_group;
            return Ok(l);
        }
        if !group.is_power_of_two() {
            return Err(Error::InvalidGroupSize {
                group,
                reason: "not a power of two".into(),
            });
        }
        if group < min_group {
            return Err(Error::InvalidGroupSize {
                group,
                reason: format!("below minimum group size {min_group}"),
            });
        }
        if group > rows || !rows.is_multiple_of(group) {
            return Err(Error::InvalidGroupSize {
                group,
                reason: format!("does not divide row count {rows}"),
            });
        }
        Ok(Self {
            kind: LayoutKind::FixedGroup,
            rows,
            cols,
            group_size: group,
            min_group,
            alpha_milli: 0,
        })
    }

    /// Rebuild a layout from its serialized descriptor fields.
    pub fn from_descriptor(
        kind: LayoutKind,
        rows: usize,
        cols: usize,
        group_size: usize,
        min_group: usize,
        alpha_milli: u32,
    ) -> Result<Self> {
        let layout = Self {
            kind,
            rows,
            cols,
            group_size,
            min_group,
            alpha_milli,
        };
        let valid = match kind {
            LayoutKind::PerTensor => group_size == rows * cols,
            LayoutKind::PerColumn => group_size == rows,
            LayoutKind::FixedGroup | LayoutKind::Adaptive => {
                group_size == rows || (group_size.is_power_of_two() && group_size <= rows)
            }
        };
        if !valid || group_size == 0 {
            return Err(Error::CorruptPayload(format!(
                "layout descriptor group size {group_size} inconsistent with kind"
            )));
        }
        Ok(layout)
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// The group size field as serialized: rows*cols for per-tensor, rows for
    /// per-column, the (resolved) group size otherwise.
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn min_group(&self) -> usize {
        self.min_group
    }

    pub fn alpha_milli(&self) -> u32 {
        self.alpha_milli
    }

    /// Rows per column-chunk: `rows` for per-tensor and per-column layouts.
    pub fn rows_per_group(&self) -> usize {
        match self.kind {
            LayoutKind::PerTensor | LayoutKind::PerColumn => self.rows,
            _ => self.group_size,
        }
    }

    /// Number of scale-sharing chunks within one column.
    pub fn groups_per_column(&self) -> usize {
        self.rows.div_ceil(self.rows_per_group())
    }

    /// Group index of row `k` within its column.
    #[inline]
    pub fn group_of(&self, k: usize) -> usize {
        k / self.rows_per_group()
    }

    /// Row range `[start, end)` of group `g` within a column.
    #[inline]
    pub fn group_rows(&self, g: usize) -> std::ops::Range<usize> {
        let size = self.rows_per_group();
        let start = g * size;
        start..((start + size).min(self.rows))
    }

    /// Total number of scale entries: 1 for per-tensor, groups x cols otherwise.
    pub fn num_scales(&self) -> usize {
        match self.kind {
            LayoutKind::PerTensor => 1,
            _ => self.groups_per_column() * self.cols,
        }
    }

    /// Index into the scale matrix for (group `g`, column `j`).
    #[inline]
    pub fn scale_index(&self, g: usize, j: usize) -> usize {
        match self.kind {
            LayoutKind::PerTensor => 0,
            _ => g * self.cols + j,
        }
    }

    /// Check compatibility with a tensor shape.
    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::IncompatibleLayout {
                rows: self.rows,
                group: self.rows_per_group(),
                tensor_rows: rows,
            });
        }
        Ok(())
    }
}

/// Construct a validated layout for the given kind and shape.
///
/// `group` is required for [`LayoutKind::FixedGroup`] and ignored otherwise.
/// Adaptive layouts come from [`adapt_group_size`], which needs the tensor
/// data; requesting one here is an error.
pub fn make_layout(
    kind: LayoutKind,
    rows: usize,
    cols: usize,
    group: Option<usize>,
    min_group: usize,
) -> Result<GroupLayout> {
    if rows == 0 || cols == 0 {
        return Err(Error::Validation("layout for empty shape".into()));
    }
    match kind {
        LayoutKind::PerTensor => Ok(GroupLayout::per_tensor(rows, cols)),
        LayoutKind::PerColumn => Ok(GroupLayout::per_column(rows, cols)),
        LayoutKind::FixedGroup => {
            let group = group.ok_or_else(|| Error::InvalidGroupSize {
                group: 0,
                reason: "fixed_group requires a group size".into(),
            })?;
            GroupLayout::fixed_group(rows, cols, group, min_group)
        }
        LayoutKind::Adaptive => Err(Error::Validation(
            "adaptive layouts require tensor data; use adapt_group_size".into(),
        )),
    }
}

/// One level of the adaptive halving search.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub parent_group: usize,
    pub child_group: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Whether this halving was accepted.
    pub halved: bool,
}

/// Full trace of an adaptive group-size search.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveReport {
    pub tensor: String,
    pub alpha: f64,
    pub min_group: usize,
    pub levels: Vec<LevelRecord>,
    pub resolved: usize,
}

/// max |x| over a row range of one column; the "range" of a symmetric
/// quantizer (min..max would double-count asymmetry absmax scaling ignores).
fn group_range(t: &Tensor, col: usize, rows: std::ops::Range<usize>) -> f64 {
    let mut m = 0.0f32;
    for k in rows {
        m = m.max(t.get(k, col).abs());
    }
    m as f64
}

/// Candidate child size one halving below `current` for a column of `rows`.
/// Non-power-of-two row counts step onto the power-of-two grid first; the
/// last (ragged) group of a column absorbs the remainder.
fn half_size(current: usize, rows: usize) -> usize {
    if current == rows && !rows.is_power_of_two() {
        rows.next_power_of_two() >> 1
    } else {
        current >> 1
    }
}

/// Find one group size for the whole matrix by the range-ratio halving rule.
///
/// Starting from per-column groups, each level splits every group in half and
/// compares child ranges against their parent: `ratio = range(child) /
/// range(parent)` (1 when the parent range is 0). If the smallest ratio falls
/// below `alpha` the halving is accepted and the search recurses; it stops
/// when all ratios are at least `alpha` (ranges stable) or the next size
/// would drop below `min_group`.
pub fn adapt_group_size(
    t: &Tensor,
    alpha: f64,
    min_group: usize,
) -> Result<(GroupLayout, AdaptiveReport)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if min_group == 0 || !min_group.is_power_of_two() {
        return Err(Error::InvalidGroupSize {
            group: min_group,
            reason: "min_group must be a positive power of two".into(),
        });
    }

    let rows = t.rows();
    let cols = t.cols();
    let mut levels = Vec::new();
    let mut current = rows;
    // Parent ranges, one per (column, group), indexed group-major per column.
    let mut parent_ranges: Vec<Vec<f64>> = (0..cols)
        .map(|j| vec![group_range(t, j, 0..rows)])
        .collect();

    let mut level = 0usize;
    loop {
        let child = half_size(current, rows);
        if child < min_group || child == 0 {
            break;
        }
        let num_children = rows.div_ceil(child);
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = f64::NEG_INFINITY;
        let mut child_ranges: Vec<Vec<f64>> = Vec::with_capacity(cols);
        for j in 0..cols {
            let mut ranges = Vec::with_capacity(num_children);
            for c in 0..num_children {
                let start = c * child;
                let end = ((c + 1) * child).min(rows);
                let r = group_range(t, j, start..end);
                let parent_idx = start / current.max(1);
                let parent = parent_ranges[j][parent_idx.min(parent_ranges[j].len() - 1)];
                let ratio = if parent == 0.0 { 1.0 } else { r / parent };
                min_ratio = min_ratio.min(ratio);
                max_ratio = max_ratio.max(ratio);
                ranges.push(r);
            }
            child_ranges.push(ranges);
        }
        let halve = min_ratio < alpha;
        levels.push(LevelRecord {
            level,
            parent_group: current,
            child_group: child,
            min_ratio,
            max_ratio,
            halved: halve,
        });
        if !halve {
            break;
        }
        current = child;
        parent_ranges = child_ranges;
        level += 1;
    }

    let layout = if current == rows {
        let mut l = GroupLayout::per_column(rows, cols);
        l.kind = LayoutKind::Adaptive;
        l.min_group = min_group;
        l.alpha_milli = (alpha * 1000.0).round() as u32;
        l
    } else {
        GroupLayout {
            kind: LayoutKind::Adaptive,
            rows,
            cols,
            group_size: current,
            min_group,
            alpha_milli: (alpha * 1000.0).round() as u32,
        }
    };
    let report = AdaptiveReport {
        tensor: t.name().to_string(),
        alpha,
        min_group,
        levels,
        resolved: current,
    };
    Ok((layout, report))
}
