//! Rouge-L and recognition decisions on hand-made inputs.

use memlab::model::tokenize;
use memlab::scoring::{lcs_length, longest_common_substring, recognition_trial, rouge_l};

fn main() -> memlab::error::Result<()> {
    let reference = b"the old sailor mended the torn net";
    for hypothesis in [&b"the old sailor mended the torn net"[..], b"the old sailor sold a boat", b"the old"] {
        println!(
            "{:<36} lcs {:>2}  substring {:>2}  rouge-l {:.3}",
            String::from_utf8_lossy(hypothesis),
            lcs_length(reference, hypothesis),
            longest_common_substring(reference, hypothesis),
            rouge_l(reference, hypothesis)?
        );
    }
    // Token ids work the same way: a half prompt followed by junk scores floor(n/2)/n.
    let ids = tokenize(reference, 128).content();
    let mut hyp = ids[..ids.len() / 2].to_vec();
    hyp.resize(ids.len(), 0);
    println!("half prompt: {:.3}", rouge_l(&ids, &hyp)?);
    println!("study loss 1.2 vs foil 1.5 -> correct: {}", recognition_trial(1.2, 1.5)?);
    Ok(())
}
