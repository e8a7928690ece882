//! Sequence-based relocalization against the reference memory.
//!
//! The last W observations are scored against every memory keyframe into a
//! W x M similarity table. Localization fits a straight line through the
//! table over a grid of slopes (teach/repeat velocity ratios): the line with
//! the highest mean gives the matched keyframe (its end column) and the
//! velocity ratio. After initial localization a Gaussian temporality weight
//! centered on the recent match history down-weights far-away candidates,
//! which keeps matching from jumping between repeated trajectory sections.

use serde::{Deserialize, Serialize};

use crate::descriptor::{scene_similarity, MatchConfig, SceneDescriptor};
use crate::memory::ReferenceMemory;

/// W x M matrix of scene similarities; row 0 is the oldest observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    rows: Vec<Vec<f64>>,
}

impl SimilarityTable {
    /// Rows must be nonempty and rectangular.
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        assert!(!rows.is_empty(), "similarity table needs at least one row");
        let m = rows[0].len();
        assert!(m > 0, "similarity table needs at least one column");
        assert!(rows.iter().all(|r| r.len() == m), "ragged similarity table");
        Self { rows }
    }

    /// Number of observations (window length W).
    pub fn window_len(&self) -> usize {
        self.rows.len()
    }

    /// Number of memory keyframes (M).
    pub fn memory_len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// CSV dump, one row per observation and one column per keyframe, for
    /// heatmap plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Relocalization parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RelocConfig {
    /// Observation window length W.
    pub window: usize,
    /// Candidate slopes in memory keyframes per observation.
    pub velocity_ratios: Vec<f64>,
    /// Temporality weight: far candidates are scaled by 1/(1 + weight).
    pub temporality_weight: f64,
    /// Temporality kernel width in keyframes.
    pub temporality_width: f64,
    /// Minimum best-line mean score to count as localized.
    pub localized_threshold: f64,
    /// Matched indexes kept as the temporality history.
    pub history_len: usize,
}

impl Default for RelocConfig {
    fn default() -> Self {
        Self {
            window: 10,
            velocity_ratios: (5..=20).map(|k| k as f64 / 10.0).collect(),
            temporality_weight: 1.0,
            temporality_width: 10.0,
            localized_threshold: 0.3,
            history_len: 5,
        }
    }
}

/// Where the robot believes it is along the taught sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationEstimate {
    /// Matched memory keyframe (best line end column).
    pub matched_index: usize,
    /// Matched slope in keyframes per observation.
    pub velocity: f64,
    /// Best line mean score, after temporality when applied.
    pub score: f64,
    pub localized: bool,
    /// Recent matched indexes, oldest first.
    pub history: Vec<usize>,
}

/// Score every memory keyframe against every recent observation.
/// `table[i][j] = scene_similarity(mem[j], recent[i])`, oldest row first.
pub fn build_similarity_table(
    recent: &[SceneDescriptor],
    mem: &ReferenceMemory,
    cfg: &MatchConfig,
) -> SimilarityTable {
    assert!(!recent.is_empty(), "need at least one observation");
    let rows = recent
        .iter()
        .map(|scene| {
            mem.keyframes
                .iter()
                .map(|kf| scene_similarity(kf, scene, cfg))
                .collect()
        })
        .collect();
    SimilarityTable::new(rows)
}

/// Gaussian temporality weighting of a candidate score by its distance from
/// the mean of the match history. Empty history leaves the score unchanged.
pub fn apply_temporality(
    raw_score: f64,
    index: usize,
    history: &[usize],
    cfg: &RelocConfig,
) -> f64 {
    if history.is_empty() {
        return raw_score;
    }
    let anchor = history.iter().sum::<usize>() as f64 / history.len() as f64;
    let d = index as f64 - anchor;
    let kernel = (-d * d / (2.0 * cfg.temporality_width * cfg.temporality_width)).exp();
    raw_score * (1.0 + cfg.temporality_weight * kernel) / (1.0 + cfg.temporality_weight)
}

/// Best straight line through the table: end column, slope and mean score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub end_index: usize,
    pub velocity: f64,
    pub score: f64,
}

/// Line score for a given end column and slope: the mean over all W rows of
/// the cells the line passes through. Out-of-range cells contribute 0 to the
/// sum but still count in the mean.
fn line_score(table: &SimilarityTable, end: usize, velocity: f64) -> f64 {
    let w = table.window_len();
    let m = table.memory_len();
    let mut sum = 0.0;
    for i in 0..w {
        let col = (end as f64 - (w - 1 - i) as f64 * velocity).round();
        if col >= 0.0 && (col as usize) < m {
            sum += table.get(i, col as usize);
        }
    }
    sum / w as f64
}

fn search_lines(table: &SimilarityTable, cfg: &RelocConfig, history: &[usize]) -> LineFit {
    let mut velocities = cfg.velocity_ratios.clone();
    velocities.sort_by(f64::total_cmp);
    velocities.dedup();

    let mut best: Option<LineFit> = None;
    for end in 0..table.memory_len() {
        for &velocity in &velocities {
            let raw = line_score(table, end, velocity);
            let score = apply_temporality(raw, end, history, cfg);
            // strict improvement keeps the smallest (end, velocity) on ties
            if best.map_or(true, |b| score > b.score) {
                best = Some(LineFit {
                    end_index: end,
                    velocity,
                    score,
                });
            }
        }
    }
    best.expect("table has at least one cell")
}

/// Unweighted line search over all (end column, velocity) candidates.
/// Ties break toward the smaller end index, then the smaller velocity.
pub fn best_line_search(table: &SimilarityTable, cfg: &RelocConfig) -> LineFit {
    search_lines(table, cfg, &[])
}

/// Advance the localization estimate from a fresh similarity table.
///
/// Once any estimate has been localized, its match history weights candidate
/// line scores by end index before the argmax. The matched index is appended
/// to the history only when the new estimate is itself localized, so the
/// temporality anchor never absorbs unlocalized garbage.
pub fn update_from_table(
    prev: Option<&LocalizationEstimate>,
    table: &SimilarityTable,
    cfg: &RelocConfig,
) -> LocalizationEstimate {
    let history: &[usize] = prev.map_or(&[], |p| &p.history);
    let fit = search_lines(table, cfg, history);
    let localized = fit.score >= cfg.localized_threshold;
    let mut history = history.to_vec();
    if localized {
        history.push(fit.end_index);
        let extra = history.len().saturating_sub(cfg.history_len);
        history.drain(..extra);
    }
    LocalizationEstimate {
        matched_index: fit.end_index,
        velocity: fit.velocity,
        score: fit.score,
        localized,
        history,
    }
}

/// Build the similarity table from the last `cfg.window` observations and
/// advance the estimate.
pub fn update_localization(
    prev: Option<&LocalizationEstimate>,
    recent: &[SceneDescriptor],
    mem: &ReferenceMemory,
    match_cfg: &MatchConfig,
    cfg: &RelocConfig,
) -> LocalizationEstimate {
    let start = recent.len().saturating_sub(cfg.window);
    let table = build_similarity_table(&recent[start..], mem, match_cfg);
    update_from_table(prev, &table, cfg)
}
