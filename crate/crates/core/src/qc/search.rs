//! Greedy mode-to-label assignment followed by local hill-climbing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analytic::{ModeBank, ALL_DARK_THRESHOLD};
use super::modeset::ModeSet;
use crate::dataset::{Dataset, NUM_LABELS};
use crate::error::{Error, Result};
use crate::optics::{mode_tail, FieldGrid, ModeSpec, MAX_MODE_TAIL};

/// Highest order per axis in the default candidate family.
pub const DEFAULT_MAX_ORDER: u32 = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Candidate `(m, n)` orders; `None` means every order up to
    /// [`DEFAULT_MAX_ORDER`] that fits the beam's window.
    pub family: Option<Vec<(u32, u32)>>,
    pub waist: f64,
    pub center: [f64; 2],
    /// Extra hill-climb starting points. Starts using orders outside the
    /// family are skipped.
    #[serde(default)]
    pub starts: Vec<ModeSet>,
    /// Stop after this many accepted moves per climb.
    pub max_moves: usize,
}

impl SearchOptions {
    pub fn new(waist: f64, center: [f64; 2]) -> Self {
        Self {
            family: None,
            waist,
            center,
            starts: Vec::new(),
            max_moves: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub modeset: ModeSet,
    pub fidelity: f64,
    /// Fidelity of the plain greedy assignment before climbing.
    pub greedy_fidelity: f64,
    pub family_size: usize,
    pub moves: usize,
}

/// All orders up to `max_order` per axis whose mode fits `beam`'s window.
pub fn default_family(beam: &FieldGrid, waist: f64, center: [f64; 2], max_order: u32) -> Result<Vec<(u32, u32)>> {
    let mut out = Vec::new();
    for m in 0..=max_order {
        for n in 0..=max_order {
            let spec = ModeSpec { m, n, waist, center };
            if mode_tail(&spec, beam.geometry())? <= MAX_MODE_TAIL {
                out.push((m, n));
            }
        }
    }
    Ok(out)
}

/// Detection probabilities of every pattern on every family mode.
struct Table {
    family: Vec<(u32, u32)>,
    /// Row-major `[pattern][mode]`.
    q: Vec<f64>,
    labels: Vec<usize>,
    usable: [usize; NUM_LABELS],
}

impl Table {
    fn row(&self, p: usize) -> &[f64] {
        let f = self.family.len();
        &self.q[p * f..(p + 1) * f]
    }

    fn index_of(&self, order: (u32, u32)) -> Option<usize> {
        self.family.iter().position(|&o| o == order)
    }

    /// Mean diagonal of the analytic confusion matrix under `assign`.
    fn fidelity(&self, assign: &[usize; NUM_LABELS]) -> f64 {
        let mut diag = [0.0; NUM_LABELS];
        for (p, &label) in self.labels.iter().enumerate() {
            let row = self.row(p);
            let total: f64 = assign.iter().map(|&a| row[a]).sum();
            if total >= ALL_DARK_THRESHOLD {
                diag[label] += row[assign[label]] / total;
            }
        }
        (0..NUM_LABELS)
            .map(|j| diag[j] / self.usable[j].max(1) as f64)
            .sum::<f64>()
            / NUM_LABELS as f64
    }

    /// Fraction of label-`label` patterns whose largest probability among
    /// `candidate` and the already assigned modes is on `candidate`.
    fn greedy_score(&self, label: usize, candidate: usize, assigned: &[usize]) -> f64 {
        let mut hits = 0usize;
        let mut seen = 0usize;
        for (p, &l) in self.labels.iter().enumerate() {
            if l != label {
                continue;
            }
            seen += 1;
            let row = self.row(p);
            if row[candidate] > 0.0 && assigned.iter().all(|&a| row[candidate] > row[a]) {
                hits += 1;
            }
        }
        if seen == 0 {
            0.0
        } else {
            hits as f64 / seen as f64
        }
    }
}

fn build_table(dataset: &Dataset, beam: &FieldGrid, family: Vec<(u32, u32)>, waist: f64, center: [f64; 2]) -> Result<Table> {
    let specs: Vec<ModeSpec> = family
        .iter()
        .map(|&(m, n)| ModeSpec { m, n, waist, center })
        .collect();
    let bank = ModeBank::from_specs(&specs, beam)?;
    let rows = dataset
        .patterns()
        .par_iter()
        .map(|p| match bank.pure_probabilities(&p.mask) {
            Ok(q) => Ok(q),
            Err(Error::DarkPattern) => Ok(vec![0.0; family.len()]),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = dataset.patterns().iter().map(|p| p.label as usize).collect();
    let mut usable = [0usize; NUM_LABELS];
    for (row, &l) in rows.iter().zip(&labels) {
        // a pattern is usable if it reaches any family mode; the exact
        // exclusion depends on the assignment, but the count is only a divisor
        if row.iter().sum::<f64>() >= ALL_DARK_THRESHOLD {
            usable[l] += 1;
        }
    }
    Ok(Table {
        family,
        q: rows.concat(),
        labels,
        usable,
    })
}

fn greedy(table: &Table, counts: &[usize; NUM_LABELS]) -> [usize; NUM_LABELS] {
    let mut order: Vec<usize> = (0..NUM_LABELS).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut assign = [usize::MAX; NUM_LABELS];
    let mut taken = vec![false; table.family.len()];
    let mut assigned = Vec::with_capacity(NUM_LABELS);
    for label in order {
        let scores: Vec<(usize, f64)> = (0..table.family.len())
            .into_par_iter()
            .filter(|&c| !taken[c])
            .map(|c| (c, table.greedy_score(label, c, &assigned)))
            .collect();
        let best = scores
            .into_iter()
            .min_by(|&(a, sa), &(b, sb)| {
                let (ma, na) = table.family[a];
                let (mb, nb) = table.family[b];
                sb.total_cmp(&sa).then((ma + na).cmp(&(mb + nb))).then(ma.cmp(&mb))
            })
            .map(|(c, _)| c)
            .expect("family holds at least ten modes");
        assign[label] = best;
        taken[best] = true;
        assigned.push(best);
    }
    assign
}

/// Best-improvement local search over single-mode replacements and pairwise
/// label swaps.
fn climb(table: &Table, mut assign: [usize; NUM_LABELS], max_moves: usize) -> ([usize; NUM_LABELS], f64, usize) {
    let f = table.family.len();
    let mut current = table.fidelity(&assign);
    let mut moves = 0;
    while moves < max_moves {
        let mut neighbours: Vec<[usize; NUM_LABELS]> = Vec::new();
        for label in 0..NUM_LABELS {
            for c in 0..f {
                if !assign.contains(&c) {
                    let mut next = assign;
                    next[label] = c;
                    neighbours.push(next);
                }
            }
        }
        for a in 0..NUM_LABELS {
            for b in a + 1..NUM_LABELS {
                let mut next = assign;
                next.swap(a, b);
                neighbours.push(next);
            }
        }
        let scored: Vec<f64> = neighbours.par_iter().map(|n| table.fidelity(n)).collect();
        let mut best: Option<usize> = None;
        for (i, &s) in scored.iter().enumerate() {
            if s > current + 1e-12 && best.is_none_or(|b| s > scored[b]) {
                best = Some(i);
            }
        }
        match best {
            Some(i) => {
                assign = neighbours[i];
                current = scored[i];
                moves += 1;
            }
            None => break,
        }
    }
    (assign, current, moves)
}

/// Searches `options.family` for the ten-mode assignment with the highest
/// analytic fidelity on `dataset`.
pub fn greedy_mode_search(dataset: &Dataset, beam: &FieldGrid, options: &SearchOptions) -> Result<SearchResult> {
    let family = match &options.family {
        Some(f) => {
            let mut f = f.clone();
            f.sort_unstable();
            f.dedup();
            f
        }
        None => default_family(beam, options.waist, options.center, DEFAULT_MAX_ORDER)?,
    };
    if family.len() < NUM_LABELS {
        return Err(Error::FamilyTooSmall(family.len()));
    }
    let table = build_table(dataset, beam, family, options.waist, options.center)?;
    if let Some(j) = (0..NUM_LABELS).find(|&j| table.usable[j] == 0) {
        return Err(Error::EmptyLabel(j as u8));
    }

    let start = greedy(&table, &dataset.label_counts());
    let greedy_fidelity = table.fidelity(&start);
    let mut best = climb(&table, start, options.max_moves);

    for set in &options.starts {
        let idx: Option<Vec<usize>> = set.orders().iter().map(|&o| table.index_of(o)).collect();
        let Some(idx) = idx else { continue };
        let seed: [usize; NUM_LABELS] = std::array::from_fn(|k| idx[k]);
        let run = climb(&table, seed, options.max_moves);
        if run.1 > best.1 {
            best = run;
        }
    }

    let (assign, fidelity, moves) = best;
    let orders = assign.map(|a| table.family[a]);
    Ok(SearchResult {
        modeset: ModeSet::from_orders(&orders, options.waist, options.center)?,
        fidelity,
        greedy_fidelity,
        family_size: table.family.len(),
        moves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BinaryPattern, Mask};
    use crate::optics::{gaussian_beam, hg_mode, GridGeometry};
    use crate::qc::qc_confusion;

    fn support_dataset(orders: &[(u32, u32)], waist: f64, g: &GridGeometry) -> Dataset {
        // brightest third of each mode's pixels (sampled at the pixel centre)
        let patterns = orders
            .iter()
            .enumerate()
            .map(|(label, &(m, n))| {
                let mode = hg_mode(&ModeSpec::new(m, n, waist), g).unwrap();
                let mut v: Vec<(f64, usize)> = (0..784)
                    .map(|i| {
                        let (r, c) = (i / 28, i % 28);
                        let x = c as f64 - 13.5;
                        let y = 13.5 - r as f64;
                        (mode.sample_near(x, y).powi(2), i)
                    })
                    .collect();
                v.sort_by(|a, b| b.0.total_cmp(&a.0));
                let on: Vec<usize> = v[..60].iter().map(|x| x.1).collect();
                BinaryPattern {
                    mask: Mask::from_fn(|r, c| on.contains(&(r * 28 + c))),
                    label: label as u8,
                    source_index: label,
                }
            })
            .collect();
        Dataset::from_patterns(patterns)
    }

    #[test]
    fn family_too_small() {
        let g = GridGeometry::new(28, 1).unwrap();
        let beam = gaussian_beam(5.0, [0.0, 0.0], &g).unwrap();
        let ds = support_dataset(&[(0, 0); 10], 2.0, &g);
        let mut o = SearchOptions::new(2.0, [0.0, 0.0]);
        o.family = Some(vec![(0, 0), (1, 0), (1, 0)]);
        assert!(matches!(greedy_mode_search(&ds, &beam, &o), Err(Error::FamilyTooSmall(2))));
    }

    #[test]
    fn table_fidelity_matches_confusion() {
        let g = GridGeometry::new(28, 2).unwrap();
        let beam = gaussian_beam(5.0, [0.0, 0.0], &g).unwrap();
        let orders: [(u32, u32); 10] = std::array::from_fn(|k| ((k % 4) as u32, (k / 4) as u32));
        let ds = support_dataset(&orders, 2.0, &g);
        let table = build_table(&ds, &beam, orders.to_vec(), 2.0, [0.0, 0.0]).unwrap();
        let set = ModeSet::from_orders(&orders, 2.0, [0.0, 0.0]).unwrap();
        let m = qc_confusion(&ds, &set, &beam).unwrap();
        let f = table.fidelity(&std::array::from_fn(|k| k));
        assert!((f - m.fidelity()).abs() < 1e-12);
    }

    #[test]
    fn recovers_mode_supports() {
        let g = GridGeometry::new(28, 2).unwrap();
        let beam = gaussian_beam(6.0, [0.0, 0.0], &g).unwrap();
        let orders = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
        let ds = support_dataset(&orders, 2.5, &g);
        let mut o = SearchOptions::new(2.5, [0.0, 0.0]);
        o.family = Some(orders.to_vec());
        let r = greedy_mode_search(&ds, &beam, &o).unwrap();
        let identity = ModeSet::from_orders(&orders, 2.5, [0.0, 0.0]).unwrap();
        let f_id = qc_confusion(&ds, &identity, &beam).unwrap().fidelity();
        assert!(r.fidelity >= f_id - 1e-12, "{} < {}", r.fidelity, f_id);
        assert!(r.fidelity >= r.greedy_fidelity);
    }

    #[test]
    fn result_is_swap_optimal() {
        let g = GridGeometry::new(28, 2).unwrap();
        let beam = gaussian_beam(6.0, [0.0, 0.0], &g).unwrap();
        let orders = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
        let ds = support_dataset(&orders, 2.5, &g);
        let mut o = SearchOptions::new(2.5, [0.0, 0.0]);
        o.family = Some(orders.to_vec());
        let r = greedy_mode_search(&ds, &beam, &o).unwrap();
        for a in 0..NUM_LABELS {
            for b in a + 1..NUM_LABELS {
                let mut perm: [usize; 10] = std::array::from_fn(|k| k);
                perm.swap(a, b);
                let s = r.modeset.permuted(&perm).unwrap();
                let f = qc_confusion(&ds, &s, &beam).unwrap().fidelity();
                assert!(f <= r.fidelity + 1e-12);
            }
        }
    }
}
