#![no_main]

use libfuzzer_sys::fuzz_target;
use mtgnn::chem::parse_smiles;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = parse_smiles(text) {
            let degrees: usize = g.atoms.iter().map(|a| a.degree as usize).sum();
            assert_eq!(degrees, 2 * g.bonds.len());
            mtgnn::featurize::featurize_graph(&g);
        }
    }
});
