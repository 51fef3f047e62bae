//! Seriation: arrange families along a chain of strongest links and order
//! members so the permuted matrix shows its diagonal blocks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{FamilyStructure, Member, Permutation};

/// `G = J̌ᵀJ̌`; off-diagonal entries measure how strongly two families share people.
pub fn linking_matrix(j_check: &DMatrix<f64>) -> DMatrix<f64> {
    j_check.transpose() * j_check
}

/// Greedy chain over all families of `g`.
pub fn chain_order(g: &DMatrix<f64>) -> Vec<usize> {
    let all: Vec<usize> = (0..g.nrows()).collect();
    chain_over(g, &all)
}

/// Greedy chain restricted to `families`: seed with the strongest pair (lower
/// index left), then repeatedly attach the family with the strongest link to
/// either end. Ties prefer the larger link to the other end, then the lower
/// family index, then the left end.
pub fn chain_over(g: &DMatrix<f64>, families: &[usize]) -> Vec<usize> {
    match families.len() {
        0 => return Vec::new(),
        1 => return families.to_vec(),
        _ => {}
    }
    let mut seed = (families[0], families[1]);
    for (x, &a) in families.iter().enumerate() {
        for &b in &families[x + 1..] {
            let (lo, hi) = (a.min(b), a.max(b));
            let cur = g[(lo, hi)];
            let best = g[(seed.0, seed.1)];
            if cur > best || (cur == best && (lo, hi) < seed) {
                seed = (lo, hi);
            }
        }
    }
    let mut chain = std::collections::VecDeque::from([seed.0, seed.1]);
    let mut remaining: Vec<usize> = families
        .iter()
        .copied()
        .filter(|&f| f != seed.0 && f != seed.1)
        .collect();
    remaining.sort_unstable();

    while !remaining.is_empty() {
        let left = chain[0];
        let right = chain[chain.len() - 1];
        // (link, other-end link, family, at_left)
        let mut best: Option<(f64, f64, usize, bool)> = None;
        for &f in &remaining {
            for at_left in [true, false] {
                let (end, other) = if at_left { (left, right) } else { (right, left) };
                let cand = (g[(f, end)], g[(f, other)], f, at_left);
                let better = match best {
                    None => true,
                    Some(b) => {
                        cand.0 > b.0
                            || (cand.0 == b.0 && cand.1 > b.1)
                            || (cand.0 == b.0 && cand.1 == b.1 && cand.2 < b.2)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (_, _, f, at_left) = best.expect("remaining is nonempty");
        if at_left {
            chain.push_front(f);
        } else {
            chain.push_back(f);
        }
        remaining.retain(|&x| x != f);
    }
    chain.into()
}

/// The two-sided partition of an interior family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilySplit {
    pub family: usize,
    pub left_neighbor: usize,
    pub right_neighbor: usize,
    /// Members leaning to the left neighbor, in output order.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

fn sorted_by(members: &[usize], j_check: &DMatrix<f64>, col: usize, descending: bool) -> Vec<usize> {
    let mut out = members.to_vec();
    out.sort_by(|&a, &b| {
        let ord = j_check[(a, col)].total_cmp(&j_check[(b, col)]);
        (if descending { ord.reverse() } else { ord }).then(a.cmp(&b))
    });
    out
}

/// Person order along `chain` plus the splits of interior families.
pub fn member_order_with_splits(
    j_check: &DMatrix<f64>,
    assignment: &[usize],
    chain: &[usize],
) -> Result<(Vec<usize>, Vec<FamilySplit>)> {
    let q = j_check.ncols();
    if assignment.len() != j_check.nrows() {
        return Err(Error::Shape(format!(
            "assignment covers {} people but J̌ has {} rows",
            assignment.len(),
            j_check.nrows()
        )));
    }
    if let Some(&f) = assignment.iter().chain(chain).find(|&&f| f >= q) {
        return Err(Error::Parameter(format!("family {} outside 1..={q}", f + 1)));
    }
    let mut groups = vec![Vec::new(); q];
    for (i, &f) in assignment.iter().enumerate() {
        groups[f].push(i);
    }
    for (f, g) in groups.iter().enumerate() {
        if !g.is_empty() && !chain.contains(&f) {
            return Err(Error::Parameter(format!("chain misses nonempty family {}", f + 1)));
        }
    }
    let chain: Vec<usize> = chain.iter().copied().filter(|&f| !groups[f].is_empty()).collect();

    let mut order = Vec::with_capacity(assignment.len());
    let mut splits = Vec::new();
    let last = chain.len().saturating_sub(1);
    for (pos, &f) in chain.iter().enumerate() {
        let members = &groups[f];
        if chain.len() == 1 {
            order.extend(sorted_by(members, j_check, f, false));
        } else if pos == 0 {
            order.extend(sorted_by(members, j_check, f, true));
        } else if pos == last {
            order.extend(sorted_by(members, j_check, f, false));
        } else {
            let (p, r) = (chain[pos - 1], chain[pos + 1]);
            let (lean_left, lean_right): (Vec<usize>, Vec<usize>) =
                members.iter().partition(|&&i| j_check[(i, p)] >= j_check[(i, r)]);
            let left = sorted_by(&lean_left, j_check, f, false);
            let right = sorted_by(&lean_right, j_check, f, true);
            order.extend(&left);
            order.extend(&right);
            splits.push(FamilySplit {
                family: f,
                left_neighbor: p,
                right_neighbor: r,
                left,
                right,
            });
        }
    }
    Ok((order, splits))
}

pub fn member_order(j_check: &DMatrix<f64>, assignment: &[usize], chain: &[usize]) -> Result<Permutation> {
    let (order, _) = member_order_with_splits(j_check, assignment, chain)?;
    Permutation::new(order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriationPlan {
    pub linking: DMatrix<f64>,
    /// Nonempty families in chain order (0-based).
    pub family_chain: Vec<usize>,
    pub splits: Vec<FamilySplit>,
    pub person_order: Permutation,
}

/// Linking matrix, chain over nonempty families, and member order.
pub fn seriate(j_check: &DMatrix<f64>, assignment: &[usize]) -> Result<SeriationPlan> {
    let linking = linking_matrix(j_check);
    let q = j_check.ncols();
    let nonempty: Vec<usize> = (0..q).filter(|f| assignment.contains(f)).collect();
    let family_chain = chain_over(&linking, &nonempty);
    let (order, splits) = member_order_with_splits(j_check, assignment, &family_chain)?;
    Ok(SeriationPlan {
        linking,
        family_chain,
        splits,
        person_order: Permutation::new(order)?,
    })
}

/// Mean of `m` inside the diagonal blocks of `order` divided by the mean
/// outside them. Blocks are the maximal runs of equal `Some` labels along
/// `order`; people labeled `None` belong to no block.
pub fn block_contrast(m: &DMatrix<f64>, order: &Permutation, labels: &[Option<usize>]) -> f64 {
    let o = order.order();
    let mut block: Vec<Option<usize>> = Vec::with_capacity(o.len());
    let mut current = 0usize;
    for (p, &i) in o.iter().enumerate() {
        if p > 0 && labels[i] != labels[o[p - 1]] {
            current += 1;
        }
        block.push(labels[i].map(|_| current));
    }
    let (mut inside, mut n_in, mut outside, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (a, &i) in o.iter().enumerate() {
        for (b, &j) in o.iter().enumerate() {
            if block[a].is_some() && block[a] == block[b] {
                inside += m[(i, j)];
                n_in += 1;
            } else {
                outside += m[(i, j)];
                n_out += 1;
            }
        }
    }
    if n_in == 0 {
        return 0.0;
    }
    if n_out == 0 || outside == 0.0 {
        return f64::INFINITY;
    }
    (inside / n_in as f64) / (outside / n_out as f64)
}

/// Upper-class family labels of `structure` (`None` for the low class).
pub fn family_labels(structure: &FamilyStructure) -> Vec<Option<usize>> {
    structure
        .members()
        .iter()
        .map(|m| match *m {
            Member::Family(f) => Some(f),
            Member::Low => None,
        })
        .collect()
}

/// How tightly `order` packs each true family: total family size divided by
/// the total span (last minus first position plus one). 1 means every family
/// is contiguous.
pub fn order_contiguity(order: &Permutation, structure: &FamilyStructure) -> f64 {
    let mut pos = vec![0usize; order.len()];
    for (p, &i) in order.order().iter().enumerate() {
        pos[i] = p;
    }
    let q = structure.q();
    let mut first = vec![usize::MAX; q];
    let mut last = vec![0usize; q];
    let mut count = vec![0usize; q];
    for (i, m) in structure.members().iter().enumerate() {
        if let Member::Family(f) = *m {
            first[f] = first[f].min(pos[i]);
            last[f] = last[f].max(pos[i]);
            count[f] += 1;
        }
    }
    let members: usize = count.iter().sum();
    let span: usize = (0..q).filter(|&f| count[f] > 0).map(|f| last[f] - first[f] + 1).sum();
    if span == 0 {
        1.0
    } else {
        members as f64 / span as f64
    }
}

/// Purity of a partition over the upper class: each block is credited with
/// its most common true family. 1 means no block mixes families.
pub fn block_purity(labels: &[usize], structure: &FamilyStructure) -> f64 {
    let blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; structure.q()]; blocks];
    let mut upper = 0usize;
    for (i, m) in structure.members().iter().enumerate() {
        if let Member::Family(f) = *m {
            counts[labels[i]][f] += 1;
            upper += 1;
        }
    }
    if upper == 0 {
        return 1.0;
    }
    let credited: usize = counts.iter().map(|c| c.iter().copied().max().unwrap_or(0)).sum();
    credited as f64 / upper as f64
}
