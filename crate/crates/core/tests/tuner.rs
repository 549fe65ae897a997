mod common;

use sentalign::aligner::AlignmentConfig;
use sentalign::tuner::{tune_chain, tune_threshold, TuneError, TuningJob};
use sentalign::{evaluate_against_gold, align, ComparatorChain, Corpus};

fn corpus(lang: &str, lines: &[String]) -> Corpus {
    Corpus::from_lines(lang, lines).unwrap()
}

fn duplicate_job(chain: &str) -> TuningJob {
    let mut r = common::rng(11);
    let lines = common::corpus_lines(&mut r, 30);
    let mut target = lines.clone();
    common::shuffle_blocks(&mut r, &mut target, 4);
    let template = AlignmentConfig::new(chain.parse().unwrap());
    TuningJob::new(corpus("en", &lines), corpus("en", &target), corpus("en", &lines), lines, template).unwrap()
}

#[test]
fn exact_duplicates_reach_full_score_for_every_comparator() {
    let job = duplicate_job("token_overlap:0.9,matching_blocks_ratio:0.9");
    let report = tune_chain(&job).unwrap();
    assert_eq!(report.comparators.len(), 2);
    for c in &report.comparators {
        assert_eq!(c.score, 100, "{c:?}");
        assert!((c.lo..=c.hi).contains(&c.threshold));
    }
    assert_eq!(report.achieved.S, 100);
    assert_eq!(report.align_calls, job.align_calls());
}

#[test]
fn single_comparator_chain_reduces_to_tune_threshold() {
    let job = duplicate_job("matching_blocks_ratio:0.9");
    let single = tune_threshold(&job, 0).unwrap();
    let report = tune_chain(&job).unwrap();
    assert_eq!(report.comparators[0].threshold, single.threshold);
    assert_eq!(report.comparators[0].score, single.score);
    assert_eq!(report.comparators[0].trace, single.trace);
}

#[test]
fn achieved_score_is_reproducible() {
    let f = common::noisy_fixture(21, 120, 6, 5);
    let mut template = AlignmentConfig::new("matching_blocks_ratio:0.5,synonym_ratio:0.5".parse().unwrap());
    template.context.lexicon = common::synonym_lexicon("en");
    let job = TuningJob::new(
        corpus("xx", &f.source),
        corpus("en", &f.target),
        corpus("en", &f.trans),
        f.gold.clone(),
        template.clone(),
    )
    .unwrap()
    .with_resolution(1.0 / 64.0)
    .unwrap();
    let report = tune_chain(&job).unwrap();
    let mut config = template;
    config.chain = report.chain.clone();
    let rerun = align(&corpus("xx", &f.source), &corpus("en", &f.target), &corpus("en", &f.trans), &config).unwrap();
    let card = evaluate_against_gold(&rerun.decisions, &f.gold).unwrap();
    assert_eq!(card, report.achieved);
    let fragment = report.config_fragment();
    let chain: ComparatorChain = serde_json::from_value(fragment["chain"].clone()).unwrap();
    assert_eq!(chain, report.chain);
}

#[test]
fn bounds_are_respected() {
    let job = duplicate_job("matching_blocks_ratio:0.9").with_bounds(0, 0.3, 0.3 + 1.0 / 256.0).unwrap();
    let out = tune_threshold(&job, 0).unwrap();
    assert!(out.evaluations() <= 3);
    assert!((0.3..=0.3 + 1.0 / 256.0).contains(&out.threshold));
    assert!(matches!(
        duplicate_job("matching_blocks_ratio:0.9").with_bounds(0, 0.7, 0.2),
        Err(TuneError::Bounds { .. })
    ));
    assert!(matches!(
        duplicate_job("matching_blocks_ratio:0.9").with_bounds(3, 0.1, 0.2),
        Err(TuneError::Position(3))
    ));
}

#[test]
fn empty_gold_fails_before_aligning() {
    let empty: Vec<String> = Vec::new();
    let template = AlignmentConfig::new("ratio:0.5".parse().unwrap());
    let err = TuningJob::new(corpus("en", &empty), corpus("en", &empty), corpus("en", &empty), empty, template);
    assert!(matches!(err, Err(TuneError::EmptyGold)));
}
