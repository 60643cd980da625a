use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{ExtendedCbf, ACTIVATION_TOL};
use crate::error::Result;
use crate::polytope::{LpProblem, LpSolution};

/// Vertices drawn per facet.
const VERTICES_PER_FACET: usize = 8;
const ATTEMPTS_PER_SAMPLE: usize = 50;

/// One facet `{B_i = 0} n {B_j >= 0, j in bar I^l}` with its sampled
/// vertices.
struct Facet {
    vertices: Vec<Vec<f64>>,
}

impl ExtendedCbf {
    fn facet_lp(&self, term: usize, i: usize, cost: Vec<f64>) -> LpProblem {
        let mut p = LpProblem::maximize(cost);
        for j in self.extended_terms[term].iter() {
            p.push_halfspace(&self.rows[j]);
        }
        let row = &self.rows[i];
        p.push_ge(row.a().iter().map(|v| -v).collect(), row.b());
        p
    }

    fn facets(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Facet>> {
        let dim = 2 * self.n();
        let mut out = Vec::new();
        for (l, t) in self.extended_terms.iter().enumerate() {
            for i in t.iter() {
                let mut vertices = Vec::with_capacity(VERTICES_PER_FACET);
                for _ in 0..VERTICES_PER_FACET {
                    let cost: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    match self.facet_lp(l, i, cost).solve()? {
                        LpSolution::Optimal { x, .. } => vertices.push(x),
                        _ => break,
                    }
                }
                if !vertices.is_empty() {
                    out.push(Facet { vertices });
                }
            }
        }
        Ok(out)
    }

    /// `count` seeded states with `|B(x)| <= 1e-9`, taken round-robin over
    /// the facets as Dirichlet-weighted mixtures of LP vertices.
    ///
    /// Facets that are empty, or lie entirely inside another term, are
    /// skipped.
    pub fn sample_boundary(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut facets = self.facets(&mut rng)?;
        let mut out = Vec::with_capacity(count);
        let mut k = 0;
        let mut misses = vec![0usize; facets.len()];
        while out.len() < count && !facets.is_empty() {
            let f = k % facets.len();
            let x = mix(&facets[f].vertices, &mut rng);
            if self.value(&x).abs() <= ACTIVATION_TOL {
                out.push(x);
                misses[f] = 0;
                k += 1;
            } else {
                misses[f] += 1;
                if misses[f] >= ATTEMPTS_PER_SAMPLE {
                    facets.remove(f);
                    misses.remove(f);
                } else {
                    k += 1;
                }
            }
        }
        Ok(out)
    }
}

fn mix(vertices: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = vertices
        .iter()
        .map(|_| Exp1.sample(rng))
        .collect::<Vec<f64>>();
    let total: f64 = w.iter().sum();
    let mut x = vec![0.0; vertices[0].len()];
    for (v, wk) in vertices.iter().zip(&w) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += wk / total * vi;
        }
    }
    x
}
