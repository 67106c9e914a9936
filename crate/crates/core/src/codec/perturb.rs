use super::{parse, CodecError, FlipSet, SequenceKind};
use crate::oracle::Domain;

/// Inverts the selected bits of a bit-encoded reasoning sequence. Every
/// other byte of `text` is preserved, so applying the same flips twice
/// restores the original.
pub fn perturb_reasoning(text: &str, domain: Domain, flips: &FlipSet) -> Result<String, CodecError> {
    if !domain.is_bit_encoded() {
        return Err(CodecError::NotBitEncoded(domain));
    }
    let parsed = parse(text, domain, SequenceKind::Reasoning);
    if !parsed.is_parsed() || !parsed.complete {
        return Err(CodecError::NotReasoning(parsed.diagnostic));
    }
    let len = parsed.decisions.as_ref().map_or(0, Vec::len);
    if let Some(&position) = flips.positions.iter().find(|&&p| p == 0 || p > len) {
        return Err(CodecError::FlipOutOfRange { position, len });
    }
    let mut segments: Vec<String> = text.split(',').map(str::to_string).collect();
    let targets = flips
        .positions
        .iter()
        .map(|p| p - 1)
        .chain(flips.final_token.then_some(len));
    for idx in targets {
        let segment = &mut segments[idx];
        let at = segment
            .find(['0', '1'])
            .expect("parsed segment holds a bit");
        let flipped = if &segment[at..=at] == "0" { "1" } else { "0" };
        segment.replace_range(at..=at, flipped);
    }
    Ok(segments.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_position() {
        let out = perturb_reasoning("0,0,0,1,1,1,0,0", Domain::Tree, &FlipSet::position(4)).unwrap();
        assert_eq!(out, "0,0,0,0,1,1,0,0");
        let out = perturb_reasoning("0,0,0,1,1,1,0,0", Domain::Tree, &FlipSet::position(5)).unwrap();
        assert_eq!(out, "0,0,0,1,0,1,0,0");
    }

    #[test]
    fn final_token() {
        let out = perturb_reasoning("1,0,0,0,1", Domain::NlTree, &FlipSet::final_only()).unwrap();
        assert_eq!(out, "1,0,0,0,0");
    }

    #[test]
    fn whitespace_preserved() {
        let out = perturb_reasoning(" 1, 0 ,1 ", Domain::Tree, &FlipSet::position(2)).unwrap();
        assert_eq!(out, " 1, 1 ,1 ");
    }

    #[test]
    fn rejects_out_of_range_and_logreg() {
        assert_eq!(
            perturb_reasoning("1,0,1", Domain::Tree, &FlipSet::position(3)),
            Err(CodecError::FlipOutOfRange { position: 3, len: 2 })
        );
        assert!(perturb_reasoning("1,0,1", Domain::Tree, &FlipSet::position(0)).is_err());
        assert_eq!(
            perturb_reasoning("1 1;1", Domain::LogReg, &FlipSet::final_only()),
            Err(CodecError::NotBitEncoded(Domain::LogReg))
        );
        assert!(perturb_reasoning("1,x,1", Domain::Tree, &FlipSet::position(1)).is_err());
    }

    proptest! {
        #[test]
        fn flipping_twice_restores(
            bits in prop::collection::vec(any::<bool>(), 1..12),
            picks in prop::collection::btree_set(1usize..12, 0..4),
            final_token in any::<bool>(),
        ) {
            let text = bits.iter().map(|&b| if b { "1" } else { "0" }).collect::<Vec<_>>().join(",");
            let len = bits.len() - 1;
            let flips = FlipSet {
                positions: picks.into_iter().filter(|&p| p <= len).collect(),
                final_token,
            };
            let once = perturb_reasoning(&text, Domain::Tree, &flips).unwrap();
            let changed = once.bytes().zip(text.bytes()).filter(|(a, b)| a != b).count();
            prop_assert_eq!(changed, flips.positions.len() + usize::from(final_token));
            prop_assert_eq!(perturb_reasoning(&once, Domain::Tree, &flips).unwrap(), text);
        }
    }
}
