//! The three parties and the messages they exchange. Each party owns its
//! state; everything crossing a boundary is one of the message types here.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::RngCore;

use super::attack::{poison, untargeted, AttackKind};
use super::data::Dataset;
use super::model::{Model, SgdConfig};
use crate::agg::{build_mask_secret, masked_aggregate, masked_sort_round, KgcRecord, Rule, RuleConfig, SelectionMask, SelectionResult};
use crate::ckks::{Ciphertext, EvaluationKey, Evaluator, GaloisKeys, KeySet, Params, PublicKey};
use crate::distance::{
    build_distance_matrix, decrypt_packed, pack_and_encrypt, DistanceConfig, EncryptedDistanceMatrix, PackedWeights,
    WeightVector,
};
use crate::error::{Error, Result};
use crate::exec::Executor;

/// Values the server is allowed to hold: ciphertexts (and, separately,
/// evaluation keys). Anything the server receives implements this.
pub trait ServerSafe {
    /// Every ciphertext inside the value.
    fn ciphertexts(&self) -> Vec<&Ciphertext>;
}

impl ServerSafe for Ciphertext {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        alloc::vec![self]
    }
}

impl ServerSafe for PackedWeights {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.chunks().iter().collect()
    }
}

impl ServerSafe for SelectionMask {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.rows().iter().flatten().collect()
    }
}

impl ServerSafe for EncryptedDistanceMatrix {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.entries().iter().collect()
    }
}

/// Client to server: the encrypted local model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelUpload {
    pub weights: PackedWeights,
}

/// Server to key holder: encrypted distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceReport {
    pub matrix: EncryptedDistanceMatrix,
}

/// Key holder to server: the encrypted selection mask.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMessage {
    pub mask: SelectionMask,
}

/// Server to key holder: the encrypted aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateMessage {
    pub model: PackedWeights,
}

/// Key holder to clients: the decrypted global model.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalModel {
    pub weights: WeightVector,
}

/// Everything addressed to the server.
#[derive(Clone, Debug, PartialEq)]
pub enum ServerMessage {
    Upload(ModelUpload),
    Mask(MaskMessage),
}

impl ServerSafe for ModelUpload {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.weights.ciphertexts()
    }
}

impl ServerSafe for MaskMessage {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.mask.ciphertexts()
    }
}

impl ServerSafe for DistanceReport {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.matrix.ciphertexts()
    }
}

impl ServerSafe for AggregateMessage {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.model.ciphertexts()
    }
}

impl ServerSafe for ServerMessage {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        match self {
            ServerMessage::Upload(m) => m.ciphertexts(),
            ServerMessage::Mask(m) => m.ciphertexts(),
        }
    }
}

/// Evaluation keys handed to the server.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerKeys {
    pub relin: EvaluationKey,
    pub galois: GaloisKeys,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Role {
    Honest,
    Malicious(AttackKind),
}

/// A data owner. Holds the public key only.
#[derive(Clone, Debug)]
pub struct ClientState {
    pub id: usize,
    data: Dataset,
    role: Role,
    pk: Option<PublicKey>,
    params: Option<Arc<Params>>,
}

impl ClientState {
    pub fn new(id: usize, data: Dataset, role: Role) -> Self {
        ClientState { id, data, role, pk: None, params: None }
    }

    /// Installs the key holder's public key.
    pub fn with_public_key(mut self, params: &Arc<Params>, pk: PublicKey) -> Self {
        self.params = Some(params.clone());
        self.pk = Some(pk);
        self
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Local training from the broadcast model, with the client's attack
    /// applied if it is malicious.
    pub fn local_update<R: RngCore>(&self, model: &Model, global: &WeightVector, sgd: &SgdConfig, rng: &mut R) -> Result<WeightVector> {
        match self.role {
            Role::Honest => model.train(global, &self.data, sgd, rng),
            Role::Malicious(AttackKind::Untargeted { lambda }) => {
                let honest = model.train(global, &self.data, sgd, rng)?;
                untargeted(global, &honest, lambda)
            }
            Role::Malicious(kind) => model.train(global, &poison(&self.data, &kind), sgd, rng),
        }
    }

    pub fn upload<R: RngCore>(&self, w: &WeightVector, rng: &mut R) -> Result<ModelUpload> {
        let (params, pk) = self.params.as_ref().zip(self.pk.as_ref()).ok_or(Error::Key("client has no public key"))?;
        Ok(ModelUpload { weights: pack_and_encrypt(w, pk, params, rng)? })
    }
}

/// The aggregator. Holds evaluation keys and ciphertexts only.
#[derive(Debug)]
pub struct ServerState {
    eval: Evaluator,
    keys: ServerKeys,
    distance: DistanceConfig,
    inbox: Vec<PackedWeights>,
}

impl ServerState {
    pub fn new(params: &Arc<Params>, keys: ServerKeys, distance: DistanceConfig) -> Self {
        ServerState { eval: Evaluator::new(params), keys, distance, inbox: Vec::new() }
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.eval
    }

    pub fn distance_config(&self) -> &DistanceConfig {
        &self.distance
    }

    pub fn receive(&mut self, upload: ModelUpload) {
        self.inbox.push(upload.weights);
    }

    pub fn received(&self) -> usize {
        self.inbox.len()
    }

    /// Drops the round's uploads.
    pub fn clear(&mut self) {
        self.inbox.clear();
    }

    /// Encrypted distances over the received models.
    pub fn distance_phase<E: Executor>(&self, exec: &E) -> Result<DistanceReport> {
        let matrix =
            build_distance_matrix(&self.eval, &self.inbox, &self.keys.relin, &self.keys.galois, &self.distance, exec)?;
        Ok(DistanceReport { matrix })
    }

    /// Masked aggregation; `average` is the public selection size of
    /// averaging rules.
    pub fn aggregate<E: Executor>(&self, mask: &MaskMessage, average: Option<usize>, exec: &E) -> Result<AggregateMessage> {
        let model = masked_aggregate(&self.eval, &self.inbox, &mask.mask, &self.keys.relin, average, exec)?;
        Ok(AggregateMessage { model })
    }
}

impl ServerSafe for ServerState {
    fn ciphertexts(&self) -> Vec<&Ciphertext> {
        self.inbox.iter().flat_map(|w| w.chunks()).collect()
    }
}

/// The trusted key holder: the only party with the secret key and the only
/// one that decrypts.
#[derive(Clone, Debug)]
pub struct KgcState {
    params: Arc<Params>,
    keys: KeySet,
    rule: RuleConfig,
}

impl KgcState {
    /// Generates all key material; `steps` are the rotations the server's
    /// slot reduction needs.
    pub fn new<R: RngCore>(params: &Arc<Params>, rule: RuleConfig, steps: &[usize], rng: &mut R) -> Result<Self> {
        let keys = KeySet::generate(params, steps, rng)?;
        Ok(KgcState { params: params.clone(), keys, rule })
    }

    pub fn params(&self) -> &Arc<Params> {
        &self.params
    }

    pub fn rule(&self) -> &RuleConfig {
        &self.rule
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public.clone()
    }

    pub fn server_keys(&self) -> ServerKeys {
        ServerKeys { relin: self.keys.relin.clone(), galois: self.keys.galois.clone() }
    }

    /// Decrypt, select and mask. The undefended mean needs no distances.
    pub fn select<R: RngCore>(&self, report: Option<&DistanceReport>, n: usize, rng: &mut R) -> Result<(MaskMessage, KgcRecord)> {
        match (report, self.rule.rule) {
            (Some(r), _) => {
                let (mask, record) = masked_sort_round(&self.params, &r.matrix, &self.keys.secret, &self.rule, rng)?;
                Ok((MaskMessage { mask }, record))
            }
            (None, Rule::Mean) => {
                let selection = SelectionResult { rule: Rule::Mean, selected: (0..n).collect() };
                let mask = build_mask_secret(&selection, n, &self.keys.secret, &self.params, rng)?;
                let distances = crate::agg::DecryptedDistances::Totals(Vec::new());
                Ok((MaskMessage { mask }, KgcRecord { distances, selection }))
            }
            (None, _) => Err(Error::Rule("the configured rule needs encrypted distances")),
        }
    }

    /// Decrypts the aggregate for broadcast.
    pub fn open(&self, agg: &AggregateMessage) -> Result<GlobalModel> {
        let values = decrypt_packed(&self.params, &self.keys.secret, &agg.model)?;
        Ok(GlobalModel { weights: WeightVector::new(values)? })
    }
}
