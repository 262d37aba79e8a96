use std::path::PathBuf;

use clap::Args;
use sdsomp_core::model::{generate_synthetic, load_matrix, EndmemberSource, MatrixFormat};
use sdsomp_core::SynthParams;

use crate::args::{MatrixFormatArg, SceneArgs};
use crate::dataset::write_dataset;
use crate::failure::{usage, Failure};

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[command(flatten)]
    pub scene: SceneArgs,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = MatrixFormatArg::Csv)]
    pub matrix_format: MatrixFormatArg,
}

impl SceneArgs {
    /// Scene template and a short description of its endmember source.
    pub fn params(&self, seed: u64) -> Result<(SynthParams, String), Failure> {
        let (source, label) = match &self.library {
            Some(path) => {
                let lib = load_matrix(path, MatrixFormat::from_path(path))
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
                (EndmemberSource::Library(lib), format!("library:{}", path.display()))
            }
            None => (EndmemberSource::Random { bands: self.m }, "random".to_string()),
        };
        Ok((
            SynthParams {
                n_endmembers: self.n,
                n_pixels: self.l,
                source,
                snr_db: self.snr,
                purity: self.purity,
                pure_repeats: self.repeats,
                seed,
            },
            label,
        ))
    }
}

pub fn run(cmd: &SynthCmd) -> Result<(), Failure> {
    let (params, label) = cmd.scene.params(cmd.seed)?;
    let instance = generate_synthetic(&params)?;
    let format = match cmd.matrix_format {
        MatrixFormatArg::Csv => MatrixFormat::Csv,
        MatrixFormatArg::Bin => MatrixFormat::BinaryF64Le,
    };
    let manifest = write_dataset(&cmd.out, &instance, cmd.seed, &label, cmd.scene.repeats, format)?;
    println!(
        "wrote {} (N={}, M={}, L={}, SNR={} dB, purity={}, seed={})",
        cmd.out.display(),
        manifest.n_endmembers,
        manifest.bands,
        manifest.pixels,
        manifest.snr_db,
        manifest.purity,
        manifest.seed
    );
    Ok(())
}
