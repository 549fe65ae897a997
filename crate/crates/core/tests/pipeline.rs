mod common;

use sentalign::aligner::{read_report, write_report, AlignmentConfig};
use sentalign::{align, evaluate_against_gold, Corpus, Execution};

fn corpus(lang: &str, lines: &[String]) -> Corpus {
    Corpus::from_lines(lang, lines).unwrap()
}

#[test]
fn shipped_fixture_scores_well() {
    let f = common::Fixture::read_from(&common::fixture_dir()).unwrap();
    let mut config = AlignmentConfig::new("matching_blocks_ratio:0.9,synonym_ratio:0.9".parse().unwrap());
    config.context.lexicon = common::synonym_lexicon("en");
    let result = align(&corpus("xx", &f.source), &corpus("en", &f.target), &corpus("en", &f.trans), &config).unwrap();
    let card = evaluate_against_gold(&result.decisions, &f.gold).unwrap();
    assert_eq!(card.L, 1005);
    assert_eq!(card.D, 20);
    assert!(card.S >= 95, "{card:?}");
}

#[test]
fn sequential_and_parallel_agree() {
    let f = common::noisy_fixture(31, 300, 15, 8);
    let mut config = AlignmentConfig::new("token_overlap:0.8,matching_blocks_ratio:0.8,synonym_ratio:0.8".parse().unwrap());
    config.context.lexicon = common::synonym_lexicon("en");
    let run = |execution| {
        let mut c = config.clone();
        c.execution = execution;
        align(&corpus("xx", &f.source), &corpus("en", &f.target), &corpus("en", &f.trans), &c).unwrap()
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn shorter_target_yields_disproportion_fills() {
    let mut r = common::rng(41);
    let source = common::corpus_lines(&mut r, 40);
    let (target, dropped) = common::drop_exact(&mut r, &source, 2);
    let config = AlignmentConfig::new("ratio:0.9".parse().unwrap());
    let result = align(&corpus("en", &source), &corpus("en", &target), &corpus("en", &source), &config).unwrap();
    assert_eq!(result.counts.total, 40);
    assert_eq!(result.counts.disproportion, 2);
    assert_eq!(result.counts.aligned, 38);
    let filled: Vec<usize> = result
        .decisions
        .iter()
        .filter(|d| d.target_index().is_none())
        .map(|d| d.source_index)
        .collect();
    assert_eq!(filled, dropped);
}

#[test]
fn report_round_trips() {
    let f = common::noisy_fixture(51, 80, 4, 3);
    let config = AlignmentConfig::new("ratio:0.9".parse().unwrap());
    let result = align(&corpus("xx", &f.source), &corpus("en", &f.target), &corpus("en", &f.trans), &config).unwrap();
    let mut buf = Vec::new();
    write_report(&result, &mut buf).unwrap();
    let (decisions, trailer) = read_report(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(decisions, result.decisions);
    assert_eq!(trailer.counts, result.counts);
    assert_eq!(trailer.unmatched_targets, result.unmatched_targets);
}
