use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").unwrap();
    let header = PathBuf::from(&crate_dir).join("include/ser.h");

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(PathBuf::from(&crate_dir).join("cbindgen.toml"))
        .expect("failed to read cbindgen.toml");
    match cbindgen::Builder::new().with_crate(&crate_dir).with_config(config).generate() {
        Ok(bindings) => {
            bindings.write_to_file(&header);
        }
        // A half-edited lib.rs should surface as a rustc error, not a build script panic.
        Err(cbindgen::Error::ParseSyntaxError { .. }) => {
            println!("cargo:warning=cbindgen could not parse src/lib.rs; header left as is");
        }
        Err(e) => panic!("cbindgen failed: {e:?}"),
    }
}
