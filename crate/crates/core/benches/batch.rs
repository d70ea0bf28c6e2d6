use std::collections::BTreeMap;

use barec_core::guidelines::batch_floors;
use barec_core::iaa::{pairwise_reports, IaaSentence, IaaSet, Strictness};
use barec_core::{Execution, GuidelineProfile, Level, LevelScheme};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "سُلوكي", "مَسْؤولِيَّتي", "أَرْنَبٌ", "كتب", "الولد", "الدرس", "في", "المدرسة", "مُسْتَشْفَياتِهِمْ",
    "قرأ", "الطالبة", "كِتابًا", "جديدًا", "عن", "تاريخ", "العلوم",
];

fn sentences(n: usize) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..25);
            let text: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
            (i.to_string(), text.join(" "))
        })
        .collect()
}

fn sets(n: usize) -> Vec<IaaSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..n)
        .map(|i| IaaSet {
            id: format!("set{i}"),
            phase: "p".into(),
            sentences: (0..100)
                .map(|j| {
                    let truth: i16 = rng.gen_range(1..=19);
                    let mut labels = BTreeMap::new();
                    for a in 0..5 {
                        let l = (truth + rng.gen_range(-3..=3)).clamp(1, 19) as u8;
                        labels.insert(format!("A{a}"), Level::new(l).unwrap());
                    }
                    IaaSentence { sentence_id: j.to_string(), text: String::new(), labels, ul: None }
                })
                .collect(),
        })
        .collect()
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn floors(c: &mut Criterion) {
    let profile = GuidelineProfile::shipped();
    let input = sentences(5_000);
    let mut group = c.benchmark_group("batch_floors");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, input.len()), &input, |b, input| {
            b.iter(|| batch_floors(black_box(input), &profile, exec))
        });
    }
    group.finish();
}

fn agreement(c: &mut Criterion) {
    let scheme = LevelScheme::shipped();
    let input = sets(200);
    let mut group = c.benchmark_group("pairwise_reports");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, input.len()), &input, |b, input| {
            b.iter(|| pairwise_reports(black_box(input), Strictness::Lenient, &scheme, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, floors, agreement);
criterion_main!(benches);
