use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrag_core::eval::{prediction_metrics, topk_curve, topk_retrieval_accuracy, Granularity};
use vrag_core::{Label, Taxonomy};

fn all_labels(t: &Taxonomy) -> Vec<Label> {
    t.all_species()
        .map(|(s, c)| Label {
            category: c.to_string(),
            species: s.to_string(),
        })
        .collect()
}

/// Recount by explicit loops over rank positions.
fn brute_topk(hits: &[Vec<Label>], truths: &[Label], k: usize, species: bool) -> f64 {
    let mut correct = 0usize;
    for q in 0..truths.len() {
        let mut found = false;
        let mut rank = 0;
        while rank < k && rank < hits[q].len() {
            let h = &hits[q][rank];
            let m = if species {
                h.species == truths[q].species
            } else {
                h.category == truths[q].category
            };
            if m {
                found = true;
            }
            rank += 1;
        }
        if found {
            correct += 1;
        }
    }
    correct as f64 / truths.len() as f64
}

fn random_instance(rng: &mut ChaCha8Rng, labels: &[Label]) -> (Vec<Vec<Label>>, Vec<Label>) {
    let n = rng.random_range(1..=200usize);
    let truths: Vec<Label> = (0..n)
        .map(|_| labels[rng.random_range(0..labels.len())].clone())
        .collect();
    let hits = (0..n)
        .map(|_| {
            let len = rng.random_range(0..=8usize);
            (0..len)
                .map(|_| labels[rng.random_range(0..labels.len())].clone())
                .collect()
        })
        .collect();
    (hits, truths)
}

#[test]
fn topk_matches_brute_force() {
    let t = Taxonomy::default();
    let labels = all_labels(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let (hits, truths) = random_instance(&mut rng, &labels);
        for k in 1..=10 {
            let cat = topk_retrieval_accuracy(&hits, &truths, k, Granularity::Category).unwrap();
            let sp = topk_retrieval_accuracy(&hits, &truths, k, Granularity::Species).unwrap();
            assert_eq!(cat, brute_topk(&hits, &truths, k, false));
            assert_eq!(sp, brute_topk(&hits, &truths, k, true));
            assert!(sp <= cat);
        }
    }
}

#[test]
fn prediction_metrics_match_brute_force() {
    let t = Taxonomy::default();
    let cats: Vec<String> = t.categories().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let n = rng.random_range(1..=200usize);
        let truths: Vec<String> = (0..n)
            .map(|_| cats[rng.random_range(0..cats.len())].clone())
            .collect();
        let preds: Vec<Option<String>> = (0..n)
            .map(|i| match rng.random_range(0..4) {
                0 => None,
                1 => Some(truths[i].clone()),
                _ => Some(cats[rng.random_range(0..cats.len())].clone()),
            })
            .collect();
        let m = prediction_metrics(&preds, &truths, &t).unwrap();

        let correct = (0..n)
            .filter(|&i| preds[i].as_ref() == Some(&truths[i]))
            .count();
        assert_eq!(m.final_top1, correct as f64 / n as f64);
        assert_eq!(m.micro_recall(), m.final_top1);
        assert_eq!(m.confusion.total(), n);
        for (ci, class) in cats.iter().enumerate() {
            let tp = (0..n)
                .filter(|&i| &truths[i] == class && preds[i].as_ref() == Some(class))
                .count();
            let fp = (0..n)
                .filter(|&i| &truths[i] != class && preds[i].as_ref() == Some(class))
                .count();
            let support = (0..n).filter(|&i| &truths[i] == class).count();
            let unresolved = (0..n)
                .filter(|&i| &truths[i] == class && preds[i].is_none())
                .count();
            let pc = &m.per_class[ci];
            assert_eq!(pc.class, *class);
            assert_eq!(pc.support, support);
            assert_eq!(
                pc.precision,
                (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64)
            );
            assert_eq!(pc.recall, (support > 0).then(|| tp as f64 / support as f64));
            assert_eq!(m.confusion.counts[ci].iter().sum::<usize>(), support);
            assert_eq!(*m.confusion.counts[ci].last().unwrap(), unresolved);
        }
    }
}

fn hits_strategy() -> impl Strategy<Value = (Vec<Vec<Label>>, Vec<Label>)> {
    let labels = all_labels(&Taxonomy::default());
    let pick = prop::sample::select(labels);
    (1usize..60).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(pick.clone(), 0..8), n),
            prop::collection::vec(pick.clone(), n),
        )
    })
}

proptest! {
    #[test]
    fn topk_is_monotone_and_species_bounded((hits, truths) in hits_strategy()) {
        let cat = topk_curve(&hits, &truths, 10, Granularity::Category).unwrap();
        let sp = topk_curve(&hits, &truths, 10, Granularity::Species).unwrap();
        for k in 1..10 {
            prop_assert!(cat[&k] <= cat[&(k + 1)]);
            prop_assert!(sp[&k] <= sp[&(k + 1)]);
        }
        for k in 1..=10 {
            prop_assert!(sp[&k] <= cat[&k]);
            prop_assert!((0.0..=1.0).contains(&cat[&k]));
        }
    }
}
