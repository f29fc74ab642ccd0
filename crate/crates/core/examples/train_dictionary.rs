//! Train a coupled dictionary on synthetic recordings and save it.
//!
//! cargo run --release --example train_dictionary [out.dict]

use evsr::corpus::train_synthetic_dictionary;
use evsr::DictionaryPair;

fn main() -> evsr::Result<()> {
    // 12 random sprite scenes at 64x64, low-resolution side 32
    let dict = train_synthetic_dictionary(2, 32, 32, 200_000, 12, 0)?;
    println!(
        "{} atoms, {}x{} low-resolution / {}x{} high-resolution patches",
        dict.atom_count(),
        dict.lr_patch_size(),
        dict.lr_patch_size(),
        dict.hr_patch_size(),
        dict.hr_patch_size()
    );
    let bytes = dict.to_bytes();
    assert_eq!(DictionaryPair::from_bytes(&bytes)?, dict);
    let path = std::env::args().nth(1).unwrap_or_else(|| "x2.dict".into());
    std::fs::write(&path, &bytes)?;
    println!("wrote {} bytes to {path}", bytes.len());
    Ok(())
}
