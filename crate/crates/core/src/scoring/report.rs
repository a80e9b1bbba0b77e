use std::fmt::Write as _;

use super::DerBreakdown;

#[derive(Debug, Clone, PartialEq)]
pub struct FileScore {
    pub file_id: String,
    pub der: DerBreakdown,
}

/// Corpus total: durations summed, so files weigh by scored speech.
pub fn aggregate(scores: &[FileScore]) -> DerBreakdown {
    let sum = |f: fn(&DerBreakdown) -> f64| scores.iter().map(|s| f(&s.der)).sum::<f64>();
    DerBreakdown::from_durations(
        sum(|d| d.missed_s),
        sum(|d| d.fa_s),
        sum(|d| d.spke_s),
        sum(|d| d.scored_speech_s),
    )
}

pub fn format_report(scores: &[FileScore]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>8} {:>8} {:>8} {:>8} {:>12}",
        "file", "MS%", "FA%", "SPKE%", "DER%", "scored_s"
    );
    let row = |s: &mut String, name: &str, d: &DerBreakdown| {
        let _ = writeln!(
            s,
            "{:<24} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>12.3}",
            name, d.ms_pct, d.fa_pct, d.spke_pct, d.der_pct, d.scored_speech_s
        );
    };
    for f in scores {
        row(&mut s, &f.file_id, &f.der);
    }
    row(&mut s, "TOTAL", &aggregate(scores));
    s
}

pub fn report_csv(scores: &[FileScore]) -> String {
    let mut s = String::from("file,missed_s,fa_s,spke_s,scored_s,ms_pct,fa_pct,spke_pct,der_pct\n");
    let row = |s: &mut String, name: &str, d: &DerBreakdown| {
        let _ = writeln!(
            s,
            "{},{:.3},{:.3},{:.3},{:.3},{:.4},{:.4},{:.4},{:.4}",
            name, d.missed_s, d.fa_s, d.spke_s, d.scored_speech_s, d.ms_pct, d.fa_pct, d.spke_pct, d.der_pct
        );
    };
    for f in scores {
        row(&mut s, &f.file_id, &f.der);
    }
    row(&mut s, "TOTAL", &aggregate(scores));
    s
}
