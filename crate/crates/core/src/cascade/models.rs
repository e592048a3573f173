//! Model directories: `<stage>_forward.json` and `<stage>_inverse.json`.

use std::path::{Path, PathBuf};

use crate::cascade::extract::InverseModel;
use crate::error::Result;
use crate::neural::serialize::load_model;
use crate::stage::Stage;

pub fn forward_path(dir: &Path, stage: Stage) -> PathBuf {
    dir.join(format!("{stage}_forward.json"))
}

pub fn inverse_path(dir: &Path, stage: Stage) -> PathBuf {
    dir.join(format!("{stage}_inverse.json"))
}

/// Inverse models available for extraction; either stage may be missing.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub cgg: Option<InverseModel>,
    pub id: Option<InverseModel>,
    /// Registry mismatches reported while loading.
    pub warnings: Vec<String>,
}

impl ModelSet {
    /// Loads whichever inverse models exist under `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut set = ModelSet::default();
        for stage in Stage::ALL {
            let path = inverse_path(dir, stage);
            if !path.exists() {
                continue;
            }
            let loaded = load_model::<f64>(&path)?;
            set.warnings.extend(loaded.warnings);
            let model = InverseModel::new(loaded.net)?;
            match stage {
                Stage::Cgg => set.cgg = Some(model),
                Stage::Id => set.id = Some(model),
            }
        }
        Ok(set)
    }

    pub fn get(&self, stage: Stage) -> Option<&InverseModel> {
        match stage {
            Stage::Cgg => self.cgg.as_ref(),
            Stage::Id => self.id.as_ref(),
        }
    }

    /// `(stage, content hash)` for every loaded model.
    pub fn versions(&self) -> Vec<(Stage, String)> {
        Stage::ALL
            .into_iter()
            .filter_map(|s| self.get(s).map(|m| (s, m.hash.clone())))
            .collect()
    }
}
