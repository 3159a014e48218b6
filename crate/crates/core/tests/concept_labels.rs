use catkit::concept::{
    build_vocab, ce_pseudo_loss, image_frequencies, soft_targets, sqrt_resample_weights,
    topk_sparsify, ConceptVocab, Lexicon, PseudoLabel,
};
use catkit::conllu::{DependencyParse, Token, Upos};
use catkit::semgraph::{build_graph, NodeKind, SemanticGraph};
use proptest::prelude::*;

fn lexicon() -> Lexicon {
    Lexicon::from_tsv(&std::fs::read_to_string(format!("{}/fixtures/lexicon.tsv", env!("CARGO_MANIFEST_DIR"))).unwrap()).unwrap()
}

/// "a <noun> <verb>s" / "a <adj> <noun>"
fn caption(noun: &str, other: &str, other_is_adj: bool) -> SemanticGraph {
    let tokens = if other_is_adj {
        vec![
            Token::new("a", "a", Upos::Det, Some(2), "det"),
            Token::new(other, other, Upos::Adj, Some(2), "amod"),
            Token::new(noun, noun, Upos::Noun, None, "root"),
        ]
    } else {
        vec![
            Token::new("a", "a", Upos::Det, Some(1), "det"),
            Token::new(noun, noun, Upos::Noun, Some(2), "nsubj"),
            Token::new(other, other, Upos::Verb, None, "root"),
        ]
    };
    build_graph(&DependencyParse::new(tokens).unwrap())
}

fn ten_captions() -> Vec<SemanticGraph> {
    vec![
        caption("pup", "run", false),
        caption("dog", "sit", false),
        caption("pup", "brown", true),
        caption("dog", "small", true),
        caption("puppy", "sleep", false),
        caption("hound", "bark", false),
        caption("dog", "jump", false),
        caption("pup", "white", true),
        caption("dog", "black", true),
        caption("kitten", "play", false),
    ]
}

#[test]
fn synonyms_merge_under_the_lexicon() {
    let corpus: Vec<SemanticGraph> = (0..30).flat_map(|_| ten_captions()).collect();
    // brute force: count captions whose object lemma maps to each key
    let lex = lexicon();
    let dog_count = corpus
        .iter()
        .filter(|g| g.nodes_of(NodeKind::Object).any(|n| lex.canonical(&n.lemma) == "dog"))
        .count();
    assert_eq!(dog_count, 270);
    let cat_count = corpus.len() - dog_count;
    assert_eq!(cat_count, 30);

    let v = build_vocab(&corpus, &lex, NodeKind::Object, 250).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v.concepts()[0].key, "dog");
    assert_eq!(v.concepts()[0].frequency, 270);

    // 300 joint mentions when every caption mentions a dog-like noun
    let all_dogs: Vec<SemanticGraph> = (0..30)
        .flat_map(|_| {
            ["pup", "dog", "pup", "dog", "dog", "pup", "dog", "pup", "dog", "dog"]
                .into_iter()
                .map(|n| caption(n, "run", false))
        })
        .collect();
    let v = build_vocab(&all_dogs, &lex, NodeKind::Object, 250).unwrap();
    assert_eq!(v.concepts().len(), 1);
    assert_eq!(v.get("dog").unwrap().frequency, 300);
    let v = build_vocab(&all_dogs, &Lexicon::new(), NodeKind::Object, 250).unwrap();
    assert!(v.is_empty(), "without canonicalization neither form reaches 250");
}

#[test]
fn attribute_vocabulary_and_present_ids() {
    let corpus = ten_captions();
    let lex = lexicon();
    let attrs = build_vocab(&corpus, &lex, NodeKind::Attribute, 1).unwrap();
    let keys: Vec<&str> = attrs.concepts().iter().map(|c| c.key.as_str()).collect();
    assert_eq!(keys, ["black", "brown", "small", "white"]);
    let objs = build_vocab(&corpus, &lex, NodeKind::Object, 1).unwrap();
    assert_eq!(objs.present_ids(&corpus[2], &lex), vec![objs.get("dog").unwrap().id]);
    let t = soft_targets::<f64>(&objs.present_ids(&corpus[9], &lex), &objs).unwrap();
    assert_eq!(t.dense[objs.get("cat").unwrap().id], 1.0);
}

#[test]
fn vocabulary_is_deterministic() {
    let corpus: Vec<SemanticGraph> = (0..7).flat_map(|_| ten_captions()).collect();
    let a = build_vocab(&corpus, &lexicon(), NodeKind::Object, 1).unwrap();
    let b = build_vocab(&corpus, &lexicon(), NodeKind::Object, 1).unwrap();
    assert_eq!(a.to_tsv(), b.to_tsv());
}

#[test]
fn resampling_weights_sum_to_target_length() {
    let vocab = ConceptVocab::from_tsv(NodeKind::Object, "0\tdog\t400\n1\tcat\t100\n2\tcar\t25\n3\tcouch\t4\n").unwrap();
    let present = vec![vec![0], vec![0, 1], vec![1, 2], vec![3, 0], vec![2]];
    let freqs = image_frequencies(&vocab, &present).unwrap();
    let w: Vec<f64> = sqrt_resample_weights(&freqs, 1000).unwrap();
    // direct summation oracle: raw weights 1/20, 1/10, 1/5, 1/2, 1/5
    let raw = [1.0 / 20.0, 1.0 / 10.0, 1.0 / 5.0, 1.0 / 2.0, 1.0 / 5.0];
    let norm: f64 = raw.iter().sum();
    for (got, r) in w.iter().zip(raw) {
        assert!((got - 1000.0 * r / norm).abs() < 1e-9);
    }
    assert!((w.iter().sum::<f64>() - 1000.0).abs() < 1e-9);
}

fn fd_gradient(z: &[f64], label: &PseudoLabel<f64>, h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[i] += h;
            zm[i] -= h;
            // independent evaluation: -sum q_j log(e^z_j / sum e^z)
            let loss = |v: &[f64]| {
                let s: f64 = v.iter().map(|x| x.exp()).sum();
                -label.entries().iter().map(|&(j, q)| q * (v[j].exp() / s).ln()).sum::<f64>()
            };
            (loss(&zp) - loss(&zm)) / (2.0 * h)
        })
        .collect()
}

fn probs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter("positive mass", |v| v.iter().sum::<f64>() > 1e-6)
}

proptest! {
    #[test]
    fn topk_outputs_are_normalized_sparse_and_idempotent(p in probs(40), k in prop::sample::select(vec![1usize, 5, 10, 25])) {
        let l = topk_sparsify(&p, k).unwrap();
        prop_assert!(l.len() <= k);
        prop_assert!((l.sum() - 1.0).abs() < 1e-12);
        prop_assert!(l.validate(1e-12).is_ok());
        let again = topk_sparsify(&l.to_dense(p.len()), k).unwrap();
        prop_assert_eq!(again, l);
    }

    #[test]
    fn ce_gradient_matches_central_differences(
        z in prop::collection::vec(-3.0f64..3.0, 6),
        p in probs(6),
        k in 1usize..6,
    ) {
        let label = topk_sparsify(&p, k).unwrap();
        let (_, grad) = ce_pseudo_loss(&z, &label).unwrap();
        prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        let fd = fd_gradient(&z, &label, 1e-6);
        for (a, n) in grad.iter().zip(&fd) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
            prop_assert!(rel < 1e-6, "analytic {a} vs fd {n}");
        }
    }
}

#[test]
fn single_precision_labels_work() {
    let l = topk_sparsify(&[0.5_f32, 0.3, 0.2], 2).unwrap();
    assert!((l.sum() - 1.0).abs() < 1e-6);
}
