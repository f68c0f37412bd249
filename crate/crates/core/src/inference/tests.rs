use super::*;
use crate::model::{assemble_sigma_star, exp_covariance, ModelParams};
use crate::prob_core::{std_normal_cdf, std_normal_quantile};
use crate::sampler::ChainConfig;
use nalgebra::DMatrix;
use rand::Rng;

fn draw(params: ModelParams) -> Draw {
    let h = assemble_sigma_star(&params.lambda, params.sigma2_eps).unwrap().h;
    Draw { iteration: 1, params, h }
}

fn posterior(params: Vec<ModelParams>, coords: Vec<[f64; 2]>, x: DMatrix<f64>, spatial: bool) -> PosteriorDraws {
    let s = params[0].n_species();
    let n = coords.len();
    PosteriorDraws {
        config: ChainConfig { spatial, r: params[0].r(), ..ChainConfig::default() },
        config_hash: String::new(),
        data_hash: String::new(),
        species_names: (1..=s).map(|j| format!("sp{j}")).collect(),
        site_ids: (1..=n).map(|i| format!("s{i}")).collect(),
        coords,
        x,
        draws: params.into_iter().map(draw).collect(),
        log_posterior: Vec::new(),
        degenerate_species: Vec::new(),
    }
}

fn sites(n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|i| [(i % 4) as f64, (i / 4) as f64]).collect()
}

fn params(b: DMatrix<f64>, lambda: DMatrix<f64>, n: usize, phi: f64) -> ModelParams {
    let r = lambda.ncols();
    ModelParams { b, lambda, w: DMatrix::zeros(n, r), sigma2_eps: 1.0, phi }
}

fn random_params<R: Rng>(s: usize, p: usize, r: usize, n: usize, rng: &mut R) -> ModelParams {
    let b = DMatrix::from_fn(s, p, |_, _| rng.random_range(-1.0..1.0));
    let lambda = crate::simulate::constrained_loadings(s, r, 0.9, rng);
    let w = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.5..1.5));
    ModelParams { b, lambda, w, sigma2_eps: 1.0, phi: rng.random_range(0.3..2.0) }
}

fn flat_raster(nodes: &[[f64; 2]], x: &[f64]) -> CovariateRaster {
    let vals = DMatrix::from_fn(nodes.len(), x.len(), |_, c| x[c]);
    CovariateRaster::new(nodes.to_vec(), vals, None).unwrap()
}

fn fin(e: Extended) -> f64 {
    e.finite().expect("finite value")
}

fn opts(method: PairMethod) -> MethodOptions {
    MethodOptions { method, ..MethodOptions::default() }
}

#[test]
fn no_loadings_means_independence() {
    let n = 6;
    let x = DMatrix::from_fn(n, 2, |i, c| if c == 0 { 1.0 } else { i as f64 * 0.3 - 0.5 });
    let b = DMatrix::from_row_slice(3, 2, &[0.4, 1.0, -0.7, 0.2, 1.5, -0.4]);
    let draws = posterior(vec![params(b.clone(), DMatrix::zeros(3, 1), n, 1.0); 3], sites(n), x, true);
    for loc in [Location::Site(2), Location::Point { coords: [9.0, 9.0], x: vec![1.0, 2.0] }] {
        for method in [PairMethod::Analytic, PairMethod::Conditional] {
            for t in pair_table_draws(&draws, &loc, 0, 2, &opts(method)).unwrap() {
                assert!((fin(odds_ratio_of(&t)) - 1.0).abs() < 1e-10);
            }
        }
    }
    let grid = Grid::new(0.0, 3.0, 0.0, 1.0, 4, 2).unwrap();
    let raster = flat_raster(&grid.nodes(), &[1.0, 0.2]);
    let s = odds_surface(&draws, &grid, &raster, 0, 1, &opts(PairMethod::Analytic)).unwrap();
    for node in s.active() {
        assert_eq!(node.mean_log10_theta, Extended::Finite(0.0));
        assert_eq!(node.p_exceed, 0.0);
    }
}

fn odds_ratio_of(t: &PairTable) -> Extended {
    crate::tables::odds_ratio(t).unwrap()
}

#[test]
fn arcsine_cell() {
    let lambda = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
    let draws = posterior(vec![params(DMatrix::zeros(2, 1), lambda, 1, 1.0)], vec![[0.0, 0.0]], DMatrix::from_element(1, 1, 1.0), false);
    let t = &pair_table_draws(&draws, &Location::Site(0), 0, 1, &opts(PairMethod::Analytic)).unwrap()[0];
    assert!((t.p11() - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn analytic_and_monte_carlo_agree() {
    let lambda = DMatrix::from_row_slice(2, 2, &[1.2, 0.0, -0.5, 0.8]);
    let b = DMatrix::from_row_slice(2, 1, &[0.3, -0.6]);
    let draws = posterior(vec![params(b, lambda, 1, 1.0)], vec![[0.0, 0.0]], DMatrix::from_element(1, 1, 1.0), false);
    let m = 1_000_000;
    let a = &pair_table_draws(&draws, &Location::Site(0), 0, 1, &opts(PairMethod::Analytic)).unwrap()[0];
    let mc_opts = MethodOptions { method: PairMethod::MonteCarlo, mc_samples: m, seed: 3, ..MethodOptions::default() };
    let mc = &pair_table_draws(&draws, &Location::Site(0), 0, 1, &mc_opts).unwrap()[0];
    for (p, f) in a.probs().iter().zip(mc.probs()) {
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!((p - f).abs() < 4.0 * se, "{p} vs {f}");
    }
}

#[test]
fn conditional_prior_average_matches_marginal() {
    // without spatial structure the factors at a new point follow the prior,
    // whose average of conditional tables is the marginal table
    let lambda = DMatrix::from_row_slice(2, 1, &[0.9, 0.6]);
    let b = DMatrix::from_row_slice(2, 2, &[0.2, 0.4, -0.3, 0.1]);
    let draws = posterior(vec![params(b, lambda, 2, 1.0)], sites(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]), false);
    let loc = Location::Point { coords: [5.0, 5.0], x: vec![1.0, 0.7] };
    let a = &pair_table_draws(&draws, &loc, 0, 1, &opts(PairMethod::Analytic)).unwrap()[0];
    let c_opts = MethodOptions { method: PairMethod::Conditional, krige_samples: 200_000, seed: 8, ..MethodOptions::default() };
    let c = &pair_table_draws(&draws, &loc, 0, 1, &c_opts).unwrap()[0];
    for (p, q) in a.probs().iter().zip(c.probs()) {
        assert!((p - q).abs() < 2e-3, "{p} vs {q}");
    }
}

#[test]
fn conditional_at_site_uses_stored_factors() {
    let lambda = DMatrix::from_row_slice(2, 1, &[0.9, -0.6]);
    let b = DMatrix::from_row_slice(2, 1, &[0.2, 0.1]);
    let mut p = params(b, lambda, 3, 1.0);
    p.w = DMatrix::from_column_slice(3, 1, &[0.5, -1.0, 2.0]);
    let draws = posterior(vec![p], sites(3), DMatrix::from_element(3, 1, 1.0), true);
    let t = &pair_table_draws(&draws, &Location::Site(1), 0, 1, &opts(PairMethod::Conditional)).unwrap()[0];
    let p1 = std_normal_cdf(0.2 - 0.9).unwrap();
    let p2 = std_normal_cdf(0.1 + -0.6 * -1.0).unwrap();
    assert!((t.p11() - p1 * p2).abs() < 1e-15);
    assert_eq!(odds_ratio_of(t), Extended::Finite(1.0));

    let mut bad = draws.clone();
    bad.draws[0].params.w = DMatrix::zeros(0, 1);
    assert!(pair_table_draws(&bad, &Location::Site(1), 0, 1, &opts(PairMethod::Conditional)).is_err());
    assert!("bogus".parse::<PairMethod>().is_err());
    assert_eq!("mc".parse::<PairMethod>().unwrap(), PairMethod::MonteCarlo);
    assert!(pair_table_draws(&draws, &Location::Site(1), 0, 0, &opts(PairMethod::Analytic)).is_err());
    assert!(pair_table_draws(&draws, &Location::Site(3), 0, 1, &opts(PairMethod::Analytic)).is_err());
}

#[test]
fn surface_composes_table_and_odds_ratio() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
    let n = 5;
    let x = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let ps = vec![random_params(3, 2, 2, n, &mut rng), random_params(3, 2, 2, n, &mut rng)];
    let draws = posterior(ps, sites(n), x, true);
    let nodes = vec![[0.5, 0.5], [2.0, 0.0], [7.0, 3.0]];
    let covs = DMatrix::from_row_slice(3, 2, &[1.0, 0.3, 1.0, -0.8, 1.0, 1.4]);
    let raster = CovariateRaster::new(nodes.clone(), covs.clone(), Some(0.1)).unwrap();
    for method in [PairMethod::Analytic, PairMethod::Conditional] {
        let o = MethodOptions { method, krige_samples: 50, ..MethodOptions::default() };
        let s = odds_surface_at(&draws, &nodes, &raster, 2, 0, &o).unwrap();
        for (m, node) in nodes.iter().enumerate() {
            let loc = Location::Point { coords: *node, x: covs.row(m).iter().copied().collect() };
            let o_single = MethodOptions { seed: o.seed, ..o };
            let tables = if method == PairMethod::Analytic {
                pair_table_draws(&draws, &loc, 2, 0, &o_single).unwrap()
            } else {
                // same random stream as the surface node
                let kr = Kriger::new(&draws, &nodes).unwrap();
                let f = Factors::Kriged { kriger: &kr, node: m };
                tables_at(&draws, &covs.row(m).iter().copied().collect::<Vec<_>>(), 2, 0, &o, &f, m as u64).unwrap()
            };
            let lt: Vec<f64> = tables.iter().map(|t| fin(log10_odds_ratio(t).unwrap())).collect();
            let summary = s.summaries[m].unwrap();
            assert!((fin(summary.mean_log10_theta) - (lt[0] + lt[1]) / 2.0).abs() < 1e-14);
            let (lo, hi) = (lt[0].min(lt[1]), lt[0].max(lt[1]));
            assert!((fin(summary.q05) - (lo + 0.05 * (hi - lo))).abs() < 1e-14);
            assert!((fin(summary.q95) - (lo + 0.95 * (hi - lo))).abs() < 1e-14);
            let p11 = tables.iter().map(|t| t.p11()).sum::<f64>() / 2.0;
            assert!((summary.p11_mean - p11).abs() < 1e-15);
        }
    }
}

#[test]
fn surface_is_stable_across_thread_counts() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
    let n = 6;
    let x = DMatrix::from_element(n, 1, 1.0);
    let ps = (0..4).map(|_| random_params(3, 1, 2, n, &mut rng)).collect();
    let draws = posterior(ps, sites(n), x, true);
    let grid = Grid::new(0.0, 3.0, 0.0, 2.0, 5, 4).unwrap();
    let raster = flat_raster(&grid.nodes(), &[1.0]);
    for method in [PairMethod::MonteCarlo, PairMethod::Conditional] {
        let o = MethodOptions { method, mc_samples: 500, krige_samples: 20, seed: 2 };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| odds_surface(&draws, &grid, &raster, 0, 1, &o).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}

#[test]
fn sign_follows_latent_correlation_in_every_draw() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let n = 4;
    let x = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let mut ps: Vec<ModelParams> = (0..30).map(|_| random_params(4, 2, 2, n, &mut rng)).collect();
    ps[0].lambda[(3, 0)] = 0.0;
    ps[0].lambda[(3, 1)] = 0.0;
    let draws = posterior(ps, sites(n), x, false);
    let nodes: Vec<[f64; 2]> = (0..12).map(|i| [i as f64 * 0.25, 0.0]).collect();
    let covs = DMatrix::from_fn(nodes.len(), 2, |i, c| if c == 0 { 1.0 } else { -3.0 + 0.5 * i as f64 });
    let raster = CovariateRaster::new(nodes.clone(), covs, None).unwrap();
    for (j, k) in [(0, 1), (0, 3), (1, 2), (2, 3)] {
        let per_node = log10_theta_draws(&draws, &nodes, &raster, j, k, &opts(PairMethod::Analytic)).unwrap();
        for values in per_node.into_iter().flatten() {
            for (v, d) in values.iter().zip(&draws.draws) {
                let rho = d.h[(j, k)];
                assert_eq!(v.signum(), if rho > 0.0 { 1 } else if rho < 0.0 { -1 } else { 0 }, "rho {rho}");
            }
        }
    }
}

#[test]
fn positive_correlation_gives_nonnegative_surface() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
    let ps = (0..10)
        .map(|_| {
            let mut p = random_params(3, 1, 1, 2, &mut rng);
            p.lambda = p.lambda.map(f64::abs);
            p
        })
        .collect();
    let draws = posterior(ps, sites(2), DMatrix::from_element(2, 1, 1.0), false);
    let grid = Grid::new(0.0, 1.0, 0.0, 1.0, 3, 3).unwrap();
    let raster = flat_raster(&grid.nodes(), &[1.0]);
    let s = odds_surface(&draws, &grid, &raster, 1, 2, &opts(PairMethod::Analytic)).unwrap();
    for node in s.active() {
        assert!(fin(node.q05) >= 0.0 && node.p_exceed == 1.0);
        assert!(node.q05.total_cmp(&node.q95).is_le());
    }
}

#[test]
fn kriging_interpolates_and_decays() {
    let coords = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
    let mut p = params(DMatrix::zeros(2, 1), DMatrix::from_row_slice(2, 1, &[1.0, 0.5]), 3, 0.9);
    p.w = DMatrix::from_column_slice(3, 1, &[0.4, -1.3, 0.8]);
    let draws = posterior(vec![p], coords.clone(), DMatrix::from_element(3, 1, 1.0), true);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let new = [[1.0, 0.0], [500.0, 500.0]];
    let k = &krige_factors(&draws, &new, &mut rng).unwrap()[0];
    assert!((k.mean[(0, 0)] + 1.3).abs() < 1e-10);
    assert!(k.sd[0] < 1e-6);
    assert!(k.mean[(1, 0)].abs() < 1e-10);
    assert!((k.sd[1] - 1.0).abs() < 1e-10);

    let mut ns = draws.clone();
    ns.config.spatial = false;
    assert!(krige_factors(&ns, &new, &mut rng).is_err());
}

#[test]
fn kriging_two_site_closed_form() {
    // two data sites, one new location: mean = k' K^-1 w
    let coords = vec![[0.0, 0.0], [1.0, 1.0]];
    let phi = 0.7;
    let mut p = params(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0), 2, phi);
    p.w = DMatrix::from_column_slice(2, 1, &[0.9, -0.4]);
    let draws = posterior(vec![p], coords.clone(), DMatrix::from_element(2, 1, 1.0), true);
    let new = [0.3, 0.8];
    let c = |a: [f64; 2], b: [f64; 2]| exp_covariance(crate::model::distance(a, b), phi).unwrap();
    let c12 = c(coords[0], coords[1]);
    let (k1, k2) = (c(new, coords[0]), c(new, coords[1]));
    let det = 1.0 - c12 * c12;
    let (a1, a2) = ((k1 - c12 * k2) / det, (k2 - c12 * k1) / det);
    let mean = a1 * 0.9 + a2 * -0.4;
    let var = 1.0 - (a1 * k1 + a2 * k2);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let k = &krige_factors(&draws, &[new], &mut rng).unwrap()[0];
    assert!((k.mean[(0, 0)] - mean).abs() < 1e-12);
    assert!((k.sd[0] - var.sqrt()).abs() < 1e-12);
}

#[test]
fn richness_binomial_and_perfect_dependence() {
    let s = 6;
    let draws = posterior(vec![params(DMatrix::zeros(s, 1), DMatrix::zeros(s, 1), 1, 1.0)], sites(1), DMatrix::from_element(1, 1, 1.0), false);
    let r = richness_stats(&draws, &Location::Site(0)).unwrap();
    assert!((r.mean - 3.0).abs() < 1e-14);
    assert!((r.variance - 1.5).abs() < 1e-14);
    assert_eq!(r.variance, r.independence_variance);

    let big = 1e4;
    let lambda = DMatrix::from_row_slice(2, 1, &[big, big]);
    let b = DMatrix::from_row_slice(2, 1, &[0.3 * big, 0.3 * big]);
    let draws = posterior(vec![params(b, lambda, 1, 1.0)], sites(1), DMatrix::from_element(1, 1, 1.0), false);
    let r = richness_stats(&draws, &Location::Site(0)).unwrap();
    let p = std_normal_cdf(0.3 * big / (big * big + 1.0).sqrt()).unwrap();
    assert!((r.independence_variance - 2.0 * p * (1.0 - p)).abs() < 1e-12);
    assert!((r.variance - 4.0 * p * (1.0 - p)).abs() < 1e-3);
}

#[test]
fn richness_matches_forward_simulation() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
    let s = 4;
    let x = vec![1.0, 0.4];
    let ps: Vec<ModelParams> = (0..2).map(|_| random_params(s, 2, 2, 1, &mut rng)).collect();
    let draws = posterior(ps.clone(), sites(1), DMatrix::from_row_slice(1, 2, &x), false);
    let r = richness_stats(&draws, &Location::Point { coords: [0.0, 0.0], x: x.clone() }).unwrap();

    let m = 1_000_000;
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    let mut counts = Vec::with_capacity(m);
    for t in 0..m {
        let p = &ps[t % 2];
        let w: Vec<f64> = (0..2).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let mut rich = 0.0;
        for j in 0..s {
            let eps: f64 = rng.sample(rand_distr::StandardNormal);
            let z = p.fixed_effect(&x, j) + p.random_effect(&w, j) + eps;
            if z >= 0.0 {
                rich += 1.0;
            }
        }
        s1 += rich;
        counts.push(rich);
    }
    let mean = s1 / m as f64;
    for c in &counts {
        let d = c - mean;
        s2 += d * d;
        s4 += d.powi(4);
    }
    let var = s2 / m as f64;
    let se_var = ((s4 / m as f64 - var * var) / m as f64).sqrt();
    assert!((r.variance - var).abs() < 4.0 * se_var, "{} vs {var} (se {se_var})", r.variance);
    assert!((r.mean - mean).abs() < 4.0 * (var / m as f64).sqrt());
}

#[test]
fn mean_richness_is_sum_of_marginals_and_variance_ordering() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(45);
    let n = 3;
    let x = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let ps: Vec<ModelParams> = (0..8)
        .map(|_| {
            let mut p = random_params(5, 2, 2, n, &mut rng);
            p.lambda = p.lambda.map(f64::abs);
            p
        })
        .collect();
    let draws = posterior(ps, sites(n), x, false);
    for i in 0..n {
        let loc = Location::Site(i);
        let r = richness_stats(&draws, &loc).unwrap();
        let sum: f64 = marginal_presence_means(&draws, &loc).unwrap().iter().sum();
        assert!((r.mean - sum).abs() < 1e-12);
        assert!(r.mean >= 0.0 && r.mean <= 5.0);
        for d in &draws.draws {
            let (_, v, vi) = richness_draw_moments(&d.params, &draws.site_covariates(i)).unwrap();
            assert!(v >= vi);
        }
        assert!(r.variance >= r.independence_variance);
    }
}

#[test]
fn homogeneity_odds_cases() {
    let b = DMatrix::from_row_slice(3, 1, &[std_normal_quantile(0.8).unwrap(), 0.0, 0.0]);
    let draws = posterior(vec![params(b, DMatrix::zeros(3, 1), 1, 1.0)], sites(1), DMatrix::from_element(1, 1, 1.0), false);
    let g = homogeneity_odds(&draws, &Location::Site(0), 0, 1).unwrap()[0];
    assert!((fin(g.gamma) - 4.0).abs() < 1e-12);
    let g = homogeneity_odds(&draws, &Location::Site(0), 1, 2).unwrap()[0];
    assert_eq!(g.gamma, Extended::Finite(1.0));

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(46);
    let p = random_params(3, 2, 2, 1, &mut rng);
    let x = vec![1.0, -0.6];
    let draws = posterior(vec![p.clone()], sites(1), DMatrix::from_row_slice(1, 2, &x), false);
    let g = homogeneity_odds(&draws, &Location::Site(0), 2, 0).unwrap()[0];
    let pj = std_normal_cdf(p.fixed_effect(&x, 2) / p.marginal_sd(2)).unwrap();
    let pk = std_normal_cdf(p.fixed_effect(&x, 0) / p.marginal_sd(0)).unwrap();
    let want = ((pj / (1.0 - pj)) / (pk / (1.0 - pk))).log10();
    assert!((fin(g.log10_gamma) - want).abs() < 1e-12);
}
