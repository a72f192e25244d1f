use std::sync::OnceLock;

use augcat_core::augmentation::{assemble_augmented, build_pool, select_best_per_task};
use augcat_core::cat::{simulate_batch, CatConfig, CatMode};
use augcat_core::data::{default_channels, fixture_bank, generate_synthetic, SyntheticCohort};
use augcat_core::diagnostics::{yen_q3, DEFAULT_Q3_THRESHOLD};
use augcat_core::estimation::{eap_all, FitConfig, QuadratureGrid};
use augcat_core::evaluation::{compare_tests, information_equivalence, information_ratio, step_metrics, TestRun};
use augcat_core::irt::MeanInformation;
use augcat_core::scoring::{standard_tasks, CandidateKey};
use augcat_core::{GradedItem, ItemBank, ItemKind, ResponseMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cohort() -> &'static SyntheticCohort {
    static COHORT: OnceLock<SyntheticCohort> = OnceLock::new();
    COHORT.get_or_init(|| {
        let channels = default_channels(&standard_tasks()[..4], (1.0, 2.0), 8);
        generate_synthetic(400, &fixture_bank(42), &channels, 8).unwrap()
    })
}

fn shuffled<T: Clone>(v: &[T], seed: u64) -> Vec<T> {
    let mut out = v.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

fn permuted_bank(bank: &ItemBank, seed: u64) -> ItemBank {
    let mut idx: Vec<usize> = (0..bank.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ItemBank::new(
        idx.iter().map(|&i| bank.items()[i].clone()).collect(),
        idx.iter().map(|&i| bank.is_frozen(i)).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn q3_is_symmetric_bounded_and_order_invariant(seed in any::<u64>()) {
        let c = cohort();
        let bank = fixture_bank(42);
        let grid = QuadratureGrid::default();
        let base = yen_q3(&c.responses, &bank, &grid).unwrap();
        let shuffled_bank = permuted_bank(&bank, seed);
        let other = yen_q3(&c.responses, &shuffled_bank, &grid).unwrap();
        prop_assert_eq!(base.pairs.len(), 19 * 18 / 2);
        for p in &base.pairs {
            prop_assert!(p.item_a != p.item_b);
            prop_assert!((-1.0..=1.0).contains(&p.q3));
            let q = other.get(&p.item_b, &p.item_a).unwrap();
            prop_assert!((p.q3 - q).abs() < 1e-9);
        }
    }

    #[test]
    fn equivalence_ignores_baseline_order_and_scales_with_clones(seed in any::<u64>(), k in 1usize..8) {
        let baseline = fixture_bank(42).items().to_vec();
        let llm: Vec<augcat_core::Item> = vec![GradedItem::new("SC1_A", 1.3, [-1.0, -0.2, 0.5, 1.4]).into()];
        let reordered = shuffled(&baseline, seed);
        let one = information_equivalence(&llm, &baseline);
        prop_assert!((one - information_equivalence(&llm, &reordered)).abs() < 1e-12);
        let clones: Vec<augcat_core::Item> = llm.iter().cycle().take(k).cloned().collect();
        prop_assert!((information_equivalence(&clones, &baseline) - k as f64 * one).abs() < 1e-9 * k as f64);
        let avg = MeanInformation(&baseline);
        prop_assert!((information_ratio(&vec![avg; k], &avg) - k as f64).abs() < 1e-12);
    }

    #[test]
    fn bonferroni_never_lowers_p(seed in any::<u64>(), k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<Vec<f64>> = (0..k)
            .map(|j| (0..30).map(|_| rand::Rng::random::<f64>(&mut rng) + 0.05 * j as f64).collect())
            .collect();
        let names: Vec<String> = (0..k).map(|j| format!("t{j}")).collect();
        let r = compare_tests("se", "mean", &names, &values).unwrap();
        prop_assert_eq!(r.posthoc.len(), k * (k - 1) / 2);
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
        for p in &r.posthoc {
            prop_assert!(p.p_adj >= p.p_raw);
            prop_assert!(p.p_adj > 0.0 && p.p_adj <= 1.0);
        }
    }

    #[test]
    fn cat_traces_do_not_depend_on_row_order(seed in any::<u64>()) {
        let c = cohort();
        let config = CatConfig::new(fixture_bank(42).into_frozen(), QuadratureGrid::default(), CatMode::Baseline).unwrap();
        let ids = c.respondent_ids()[..60].to_vec();
        let forward = simulate_batch(&config, &c.responses.select_respondents(&ids).unwrap()).unwrap();
        let order = shuffled(&ids, seed);
        let permuted = simulate_batch(&config, &c.responses.select_respondents(&order).unwrap()).unwrap();
        for t in &permuted {
            let same = forward.iter().find(|f| f.respondent_id == t.respondent_id).unwrap();
            prop_assert_eq!(same, t);
        }
        for t in &forward {
            let items: std::collections::HashSet<_> = t.steps.iter().filter_map(|s| s.item.clone()).collect();
            prop_assert_eq!(items.len(), 19);
            prop_assert!(t.steps.iter().enumerate().all(|(i, s)| s.step == i));
        }

        let runs = vec![TestRun::new("baseline", forward.clone())];
        let truth: Vec<f64> = ids.iter().map(|id| c.thetas[c.responses.respondent_index(id).unwrap()]).collect();
        let m = step_metrics(&runs, "baseline", Some(&truth), None).unwrap();
        let perm_truth: Vec<f64> = order.iter().map(|id| c.thetas[c.responses.respondent_index(id).unwrap()]).collect();
        let pm = step_metrics(&[TestRun::new("baseline", permuted)], "baseline", Some(&perm_truth), None).unwrap();
        for (a, b) in m.rows.iter().zip(&pm.rows) {
            prop_assert!((a.mean_se - b.mean_se).abs() < 1e-12);
            prop_assert!((a.mae.unwrap() - b.mae.unwrap()).abs() < 1e-12);
            prop_assert!((a.correlation.unwrap() - b.correlation.unwrap()).abs() < 1e-9);
        }
        prop_assert_eq!(m.rows.last().unwrap().divergence, 0.0);
    }
}

fn small_pipeline() -> (ItemBank, ResponseMatrix, ResponseMatrix, Vec<f64>) {
    let c = cohort();
    let baseline = fixture_bank(42).into_frozen();
    let thetas = eap_all(&c.responses, &baseline, &QuadratureGrid::default())
        .unwrap()
        .iter()
        .map(|e| e.theta)
        .collect();
    (baseline, c.responses.clone(), c.scores.clone(), thetas)
}

#[test]
fn pool_ranking_ignores_column_order() {
    let (baseline, matrix, scores, thetas) = small_pipeline();
    let config = FitConfig::default();
    let pool = build_pool(&scores, &baseline, &matrix, &thetas, &config).unwrap();
    assert_eq!(pool.len(), 16);
    let reversed: Vec<String> = scores.item_ids().iter().rev().cloned().collect();
    let again = build_pool(
        &scores.select_items(&reversed).unwrap(),
        &baseline,
        &matrix,
        &thetas,
        &config,
    )
    .unwrap();
    assert_eq!(pool, again);
    assert!(pool.windows(2).all(|w| w[0].info_gain >= w[1].info_gain));
    assert!(pool.iter().all(|c| c.info_gain >= 0.0));
}

#[test]
fn random_scores_gain_less_than_theta_linked_scores() {
    let (baseline, matrix, scores, thetas) = small_pipeline();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let noise: Vec<Option<u8>> = (0..matrix.n_respondents())
        .map(|_| Some(rand::Rng::random_range(&mut rng, 1..=5u8)))
        .collect();
    let random_col = ResponseMatrix::new(
        matrix.respondent_ids().to_vec(),
        vec![(
            CandidateKey::new("RND", augcat_core::scoring::PromptId::A).column_id(),
            ItemKind::Graded,
        )],
        noise,
    )
    .unwrap();
    let linked = scores.select_items(&["SC1_A", "SC1_B", "SC1_C", "SC1_D"]).unwrap();
    let pool = build_pool(
        &linked.hstack(&random_col).unwrap(),
        &baseline,
        &matrix,
        &thetas,
        &FitConfig::default(),
    )
    .unwrap();
    let random_gain = pool.iter().find(|c| c.key.task == "RND").unwrap().info_gain;
    let best_linked = pool
        .iter()
        .filter(|c| c.key.task != "RND")
        .map(|c| c.info_gain)
        .fold(0.0, f64::max);
    assert!(random_gain < best_linked, "{random_gain} vs {best_linked}");
}

#[test]
fn augmented_banks_dominate_baseline_and_keep_one_item_per_task() {
    let (baseline, matrix, scores, thetas) = small_pipeline();
    let config = FitConfig::default();
    let pool = build_pool(&scores, &baseline, &matrix, &thetas, &config).unwrap();
    let selection = select_best_per_task(&pool).unwrap();
    assert_eq!(selection, select_best_per_task(&pool).unwrap());
    let winners = selection.winners;
    let best = assemble_augmented(
        &winners,
        None,
        &baseline,
        &matrix,
        &scores,
        &config,
        DEFAULT_Q3_THRESHOLD,
    )
    .unwrap();
    let all_k = assemble_augmented(
        &winners,
        Some(winners.len()),
        &baseline,
        &matrix,
        &scores,
        &config,
        DEFAULT_Q3_THRESHOLD,
    )
    .unwrap();
    assert_eq!(best.bank, all_k.bank);

    let tasks: Vec<String> = best
        .bank
        .items()
        .iter()
        .filter(|i| i.kind() == ItemKind::Graded)
        .map(|i| CandidateKey::parse_column(i.id()).unwrap().task)
        .collect();
    let unique: std::collections::HashSet<_> = tasks.iter().collect();
    assert_eq!(unique.len(), tasks.len());

    for &theta in QuadratureGrid::default().nodes() {
        assert!(best.bank.information(theta) >= baseline.information(theta));
    }
    let augmented = CatConfig::new(best.bank.clone(), QuadratureGrid::default(), CatMode::Augmented).unwrap();
    for t in simulate_batch(&augmented, &matrix.hstack(&scores).unwrap()).unwrap() {
        assert!(t.steps[0].se <= 1.0);
    }
}
