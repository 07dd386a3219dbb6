//! Writes a tensor in the binary tensor-file layout and inspects the bytes.
//!
//! `cargo run --release --example tensor_files`

use dppn::tensor::Tensor;
use dppn::tensor_file::{load_tensor, save_tensor};

fn main() -> dppn::error::Result<()> {
    let path = std::env::temp_dir().join("dppn-example.dtf");
    let t = Tensor::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.5]])?;
    save_tensor(&t, &path)?;
    let bytes = std::fs::read(&path).map_err(|e| dppn::error::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    println!(
        "{} bytes: magic {:?}, rank {}",
        bytes.len(),
        String::from_utf8_lossy(&bytes[..4]),
        bytes[4]
    );
    let back = load_tensor(&path)?;
    println!("shape {:?}, values {:?}", back.shape(), back.data());
    Ok(())
}
