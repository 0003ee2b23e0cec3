use cartoprompt_core::embed::{
    colorize, embed_text, project_2d, tokenize, EmbedError, Lexicon, ProjectionConfig, Rgb,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn reference_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.into_iter()
        .map(|t| t.to_lowercase().chars().filter(|c| !('\u{300}'..='\u{36f}').contains(c)).collect())
        .collect()
}

#[test]
fn tokenizer_matches_reference_on_long_text() {
    let text = include_str!("../../cartoprompt/tests/fixtures/golden_preprompt.txt");
    let ours = tokenize(text);
    assert_eq!(ours, reference_tokens(text));
    assert_eq!(ours.len(), text.split(|c: char| !c.is_alphanumeric()).filter(|s| !s.is_empty()).count());
    assert_eq!(tokenize("There are 3 atm(s)"), ["there", "are", "3", "atm", "s"]);
    assert_eq!(tokenize("place_of_worship"), ["place", "of", "worship"]);
}

fn lexicon(words: &[&str], d: usize, seed: u64) -> Lexicon {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines: Vec<String> = words
        .iter()
        .map(|w| {
            let v: Vec<String> = (0..d).map(|_| format!("{:.6}", rng.random_range(-1.0..1.0f32))).collect();
            format!("{w} {}", v.join(" "))
        })
        .collect();
    Lexicon::from_lines(lines.iter().map(String::as_str)).unwrap()
}

#[test]
fn mean_matches_independent_computation() {
    let words = ["this", "is", "a", "circular", "area", "of", "radius", "300", "meters", "cafe", "s"];
    let lex = lexicon(&words, 25, 1);
    let text = "This is a circular area of radius of 300 meters. There are 18 cafe(s).";
    let got = embed_text(&lex, text);
    let toks = reference_tokens(text);
    let known: Vec<&[f32]> = toks.iter().filter_map(|t| lex.get(t)).collect();
    assert_eq!(got.in_vocabulary, known.len());
    assert_eq!(got.out_of_vocabulary, toks.len() - known.len());
    for k in 0..25 {
        let m = known.iter().map(|v| v[k] as f64).sum::<f64>() / known.len() as f64;
        assert!((got.vector[k] - m).abs() < 1e-12);
    }
}

#[test]
fn single_token_exact_and_all_oov_flagged() {
    let lex = lexicon(&["cafe"], 8, 2);
    let e = embed_text(&lex, "Cafe");
    let v: Vec<f64> = lex.get("cafe").unwrap().iter().map(|x| *x as f64).collect();
    assert_eq!(e.vector, v);
    let z = embed_text(&lex, "xyz");
    assert!(z.all_oov());
    assert!(z.vector.iter().all(|x| *x == 0.0));
}

#[test]
fn dimension_mismatch_reports_line() {
    let err = Lexicon::from_lines(["a 1 2 3", "b 1 2"]).unwrap_err();
    assert!(matches!(err, EmbedError::Dimension { line: 2, expected: 3, found: 2 }));
}

fn planar(n: usize, d: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
    let (c, s) = (0.6f64, 0.8f64);
    let high = flat
        .iter()
        .map(|p| {
            let mut v = vec![0.0; d];
            v[0] = c * p[0] - s * p[1];
            v[1] = s * p[0] + c * p[1];
            v
        })
        .collect();
    (flat, high)
}

fn max_distortion(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let da = ((a[i][0] - a[j][0]).powi(2) + (a[i][1] - a[j][1]).powi(2)).sqrt();
            let db = ((b[i][0] - b[j][0]).powi(2) + (b[i][1] - b[j][1]).powi(2)).sqrt();
            worst = worst.max((da - db).abs() / da);
        }
    }
    worst
}

#[test]
fn pca_preserves_planar_distances() {
    for (n, d) in [(30, 10), (6, 10), (50, 3)] {
        let (flat, high) = planar(n, d, n as u64);
        let p = project_2d(&high, &ProjectionConfig::default()).unwrap();
        let worst = max_distortion(&flat, &p.points);
        assert!(worst < 1e-9, "n={n} d={d}: {worst}");
    }
}

#[test]
fn pca_duplicates_share_rows_and_runs_are_bit_identical() {
    let (_, mut high) = planar(10, 10, 5);
    high.push(high[3].clone());
    let a = project_2d(&high, &ProjectionConfig::default()).unwrap();
    let b = project_2d(&high, &ProjectionConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points[3], a.points[10]);
}

fn two_clusters(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for label in 0..2 {
        let offset = if label == 0 { -10.0 } else { 10.0 };
        for _ in 0..20 {
            data.push((0..50).map(|_| offset + noise.sample(&mut rng)).collect());
            labels.push(label);
        }
    }
    (data, labels)
}

fn purity(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let centroid = |l: usize| {
        let members: Vec<&[f64; 2]> = points.iter().zip(labels).filter(|(_, x)| **x == l).map(|(p, _)| p).collect();
        let n = members.len() as f64;
        [members.iter().map(|p| p[0]).sum::<f64>() / n, members.iter().map(|p| p[1]).sum::<f64>() / n]
    };
    let c = [centroid(0), centroid(1)];
    let d2 = |p: &[f64; 2], q: &[f64; 2]| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    let correct = points
        .iter()
        .zip(labels)
        .filter(|(p, l)| {
            let nearest = if d2(p, &c[0]) <= d2(p, &c[1]) { 0 } else { 1 };
            nearest == **l
        })
        .count();
    correct as f64 / points.len() as f64
}

#[test]
fn two_clusters_separate_under_pca_and_umap() {
    let (data, labels) = two_clusters(11);
    let pca = project_2d(&data, &ProjectionConfig::default()).unwrap();
    assert_eq!(purity(&pca.points, &labels), 1.0);
    let umap = project_2d(&data, &ProjectionConfig::umap()).unwrap();
    assert_eq!(purity(&umap.points, &labels), 1.0);
    let again = project_2d(&data, &ProjectionConfig::umap()).unwrap();
    assert_eq!(umap, again);
}

#[test]
fn too_few_vectors_and_clamped_neighbours() {
    let v = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    assert!(matches!(project_2d(&v, &ProjectionConfig::default()), Err(EmbedError::TooFewVectors(2))));
    let (data, _) = two_clusters(2);
    let cfg = ProjectionConfig { n_neighbors: 100, epochs: Some(30), ..ProjectionConfig::umap() };
    let p = project_2d(&data, &cfg).unwrap();
    assert_eq!(p.warnings.len(), 1);
    assert_eq!(p.points.len(), 40);
}

#[test]
fn colorize_endpoints_and_hex() {
    assert_eq!(colorize(&[[3.0, 4.0]]), vec![Rgb { r: 128, g: 128, b: 128 }]);
    let c = colorize(&[[0.0, 1.0], [10.0, 1.0], [5.0, 1.0]]);
    assert_eq!((c[0].r, c[1].r, c[2].g), (0, 255, 128));
    assert_eq!(Rgb { r: 255, g: 0, b: 128 }.hex(), "#FF0080");
}

#[test]
fn colorize_red_follows_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<[f64; 2]> = (0..10).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    let colors = colorize(&pts);
    let mut order: Vec<usize> = (0..10).collect();
    order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]));
    for w in order.windows(2) {
        assert!(colors[w[0]].r < colors[w[1]].r, "{:?}", (pts[w[0]], pts[w[1]]));
    }
}

fn near_half_step(pts: &[[f64; 2]]) -> bool {
    for axis in 0..2 {
        let lo = pts.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo
            && pts.iter().any(|p| {
                let t = 255.0 * (p[axis] - lo) / (hi - lo);
                ((t - t.floor()) - 0.5).abs() < 1e-6
            })
        {
            return true;
        }
    }
    false
}

proptest! {
    #[test]
    fn embedding_ignores_token_order(words in prop::collection::vec(prop::sample::select(vec!["cafe", "bank", "atm", "park", "road", "zzz"]), 1..30), seed in any::<u64>()) {
        let lex = lexicon(&["cafe", "bank", "atm", "park", "road"], 16, 4);
        let mut shuffled = words.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(embed_text(&lex, &words.join(" ")), embed_text(&lex, &shuffled.join(", ")));
    }

    #[test]
    fn colorize_affine_invariant(pts in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..20),
                                 sx in 0.01..100.0f64, sy in 0.01..100.0f64, tx in -1e3..1e3f64, ty in -1e3..1e3f64) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let moved: Vec<[f64; 2]> = pts.iter().map(|p| [sx * p[0] + tx, sy * p[1] + ty]).collect();
        prop_assume!(!near_half_step(&pts));
        prop_assert_eq!(colorize(&pts), colorize(&moved));
    }

    #[test]
    fn colorize_in_range(pts in prop::collection::vec((-1e6..1e6f64, -1e6..1e6f64), 1..30)) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let c = colorize(&pts);
        prop_assert_eq!(c.len(), pts.len());
        prop_assert!(c.iter().all(|x| x.b == 128));
    }
}
