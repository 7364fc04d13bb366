//! Text dumps of vote sets and their histograms for offline plotting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::voting::{AxisModes, PoseEstimate, VoteSet};

fn votes_text(votes: &VoteSet) -> String {
    let mut s = String::new();
    for v in &votes.vectors {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    s
}

fn histogram_rows(label: &str, modes: &AxisModes, out: &mut String) {
    for (axis, mode) in modes.modes.iter().enumerate() {
        match &mode.histogram {
            Some(h) => {
                for (b, count) in h.counts.iter().enumerate() {
                    let _ = writeln!(out, "{label}\t{axis}\t{b}\t{}\t{}\t{count}", h.bin_lower(b), h.bin_lower(b + 1));
                }
            }
            None => {
                let _ = writeln!(out, "{label}\t{axis}\t-\t{}\t{}\t{}", mode.value, mode.value, modes.frame.coords[axis].len());
            }
        }
    }
}

/// Writes `rotation_votes.txt`, `translation_votes.txt` (one vote per line)
/// and `histograms.tsv` into `dir`, creating it if needed.
pub fn write_vote_dump(dir: impl AsRef<Path>, rotations: &VoteSet, translations: &VoteSet, pose: &PoseEstimate) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    write("rotation_votes.txt", votes_text(rotations))?;
    write("translation_votes.txt", votes_text(translations))?;
    let mut h = String::from("set\taxis\tbin\tlower\tupper\tcount\n");
    histogram_rows("rotation", &pose.rotation, &mut h);
    histogram_rows("translation", &pose.translation, &mut h);
    write("histograms.tsv", h)
}
