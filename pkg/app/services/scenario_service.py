#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE SCÉNARIOS - OPC UA TRUSTKIT
Fichier: app/services/scenario_service.py

Harnais d'évaluation: démarre un serveur et un client victimes avec les
profils de confiance demandés sur la boucle locale, lance l'attaque,
conduit la victime cliente dans un cycle découverte-connexion-lecture-
écriture, arrête tout puis classe la vulnérabilité.

Les pairs légitimes sont pré-provisionnés dans les deux magasins de
confiance. Le profil P3 est joué en plusieurs tours: après chaque refus,
un opérateur simulé promeut les certificats de la liste des refusés.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import re
import tempfile
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Union

from app.config.profiles import policy_for_profile
from app.exceptions import HarnessError, HarnessTimeout, TrustKitError, TrustRejected
from app.models.assessment import (
    PROFILE_PITFALLS, AssessmentReport, AttackKind, AttackOutcome, AttackResult, EvidenceKind, PitfallClass,
    Profile, ScenarioSpec, Side, UserAuth
)
from app.models.certificate import ApplicationIdentity, CertificateRecord
from app.models.channel import BASIC256SHA256_URI
from app.models.endpoint import TargetDescriptor, endpoint_offer, parse_endpoint_url
from app.models.node_store import SENSOR_NODE, SETPOINT_NODE, default_nodes
from app.models.settings import ClientConfig, ServerConfig
from app.models.trust import AcceptanceBasis, TrustPolicyKind
from app.protocol.status import is_good
from app.protocol.structures import MessageSecurityMode, UserTokenType
from app.services.client_service import UAClient
from app.services.fabricated_data import FabricatedDataGenerator
from app.services.middleperson import Manipulation, Middleperson
from app.services.pki_service import TrustStore, clone_certificate, generate_identity
from app.services.rogue_client import RogueClient
from app.services.rogue_server import RogueServer
from app.services.scanner_service import OpcScanner
from app.services.server_service import UAServer
from app.services.transcript import Transcript
from app.utils.logger import LoggerMixin, PerformanceLogger, log_function_call

PRIMARY_SIDE = {
    AttackKind.ROGUE_SERVER: Side.CLIENT,
    AttackKind.MIDDLEPERSON: Side.CLIENT,
    AttackKind.ROGUE_CLIENT: Side.SERVER,
}

BASIS_PITFALLS = {
    AcceptanceBasis.NO_VALIDATION: PitfallClass.MISSING_TRUSTLIST,
    AcceptanceBasis.AUTO_ACCEPT_FLAG: PitfallClass.TRUSTLIST_DISABLED_BY_DEFAULT,
    AcceptanceBasis.PROMOTED: PitfallClass.CERTIFICATE_EXCHANGE_IN_BAND,
}

SETPOINT_STEP = 1.0


@dataclass
class VictimIdentities:
    """Identités des deux victimes; réutilisables d'un scénario à l'autre."""
    server: ApplicationIdentity
    client: ApplicationIdentity

    @classmethod
    def generate(cls, config_class=None) -> 'VictimIdentities':
        key_bits = getattr(config_class, 'KEY_BITS', 2048)
        return cls(
            server=generate_identity('TrustKit Victim Server',
                                     getattr(config_class, 'HARNESS_SERVER_URI', 'urn:trustkit:victim:server'),
                                     key_bits=key_bits, dns_names=['localhost']),
            client=generate_identity('TrustKit Victim Client',
                                     getattr(config_class, 'HARNESS_CLIENT_URI', 'urn:trustkit:victim:client'),
                                     key_bits=key_bits),
        )


@dataclass
class VictimRun:
    """Un cycle de la victime cliente."""
    url: str
    completed: bool = False
    values: Dict[str, Any] = field(default_factory=dict)
    write_status: Optional[int] = None
    error: Optional[str] = None
    rejected_locally: bool = False


def scenario_slug(spec: ScenarioSpec) -> str:
    """Nom de dossier stable pour les transcriptions d'un scénario."""
    def flag(profile: Profile, auto_accept: bool) -> str:
        return 'off' if profile == Profile.P2_DEFAULT_ACCEPT_ALL and not auto_accept else ''

    raw = (f"{spec.attack.value}-{spec.server_profile.value}{flag(spec.server_profile, spec.server_auto_accept)}-"
           f"{spec.client_profile.value}{flag(spec.client_profile, spec.client_auto_accept)}-"
           f"{spec.user_auth.value}-{spec.seed}")
    return re.sub(r'[^A-Za-z0-9_.-]+', '_', raw).lower()


def classify(outcomes: Iterable[AttackOutcome], spec: ScenarioSpec) -> Optional[PitfallClass]:
    """
    Classe de défaut d'une évaluation, tracée depuis les preuves du côté
    visé par l'attaque: promotion d'un certificat livré dans le canal
    (iii), acceptation par drapeau par défaut (ii), absence de
    validation (i). Sans preuve de décision, le profil du côté visé fait
    foi. None si aucune attaque n'est Vulnerable.
    """
    vulnerable = [o for o in outcomes if o.result == AttackResult.VULNERABLE]
    if not vulnerable:
        return None

    for outcome in vulnerable:
        side = PRIMARY_SIDE[outcome.attack]
        on_side = [e for e in outcome.evidence if e.side == side]
        if any(e.kind == EvidenceKind.CERTIFICATE_PROMOTED for e in on_side):
            return PitfallClass.CERTIFICATE_EXCHANGE_IN_BAND
        bases = {AcceptanceBasis(e.payload['basis']) for e in on_side
                 if e.kind == EvidenceKind.ACCEPTANCE_OBSERVED and e.payload.get('basis')}
        for basis in (AcceptanceBasis.PROMOTED, AcceptanceBasis.AUTO_ACCEPT_FLAG, AcceptanceBasis.NO_VALIDATION):
            if basis in bases:
                return BASIS_PITFALLS[basis]

    side = PRIMARY_SIDE[vulnerable[0].attack]
    profile = spec.server_profile if side == Side.SERVER else spec.client_profile
    return PROFILE_PITFALLS[profile]


class ScenarioRunner(LoggerMixin):
    """
    Exécute un ScenarioSpec de bout en bout.

    Usage:
        report = ScenarioRunner(spec, TestingConfig).run()
    """

    def __init__(self, spec: ScenarioSpec, config_class=None,
                 transcript_dir: Optional[Union[str, Path]] = None,
                 manipulation: Optional[Manipulation] = None,
                 identities: Optional[VictimIdentities] = None):
        self.spec = spec
        self.config = config_class
        base = Path(transcript_dir) if transcript_dir else Path(tempfile.mkdtemp(prefix='trustkit-'))
        self.transcript_dir = base / scenario_slug(spec)
        self.transcript_dir.mkdir(parents=True, exist_ok=True)
        self.manipulation = manipulation
        self.identities = identities or VictimIdentities.generate(config_class)
        self.phase_timeout = getattr(config_class, 'PHASE_TIMEOUT', 30.0)
        self.promotion_rounds = getattr(config_class, 'OPERATOR_PROMOTION_ROUNDS', 3)
        self.username = getattr(config_class, 'HARNESS_USERNAME', 'operator')
        self.password = getattr(config_class, 'HARNESS_PASSWORD', 'secret')

        self.server_policy = policy_for_profile(spec.server_profile, spec.server_auto_accept)
        self.client_policy = policy_for_profile(spec.client_profile, spec.client_auto_accept)
        self.server_store = TrustStore(trusted=[self.identities.client.record])
        self.client_store = TrustStore(trusted=[self.identities.server.record])
        self.promotions: List[Tuple[Side, CertificateRecord, int]] = []
        self.runs: List[VictimRun] = []
        self.notes: List[str] = []
        self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix='scenario')
        self._run_index = 0

    @property
    def uses_username(self) -> bool:
        return self.spec.user_auth == UserAuth.USERNAME

    # === PHASES ===

    def phase(self, name: str, func: Callable, *args, **kwargs):
        """
        Exécute une phase avec le délai maximal configuré.

        Raises:
            HarnessTimeout: phase trop longue
        """
        with PerformanceLogger(f"{scenario_slug(self.spec)}: {name}"):
            future = self._executor.submit(func, *args, **kwargs)
            try:
                return future.result(timeout=self.phase_timeout)
            except FutureTimeout:
                raise HarnessTimeout(f"Phase « {name} » au-delà de {self.phase_timeout:.0f} s") from None

    def victim_server_config(self) -> ServerConfig:
        tokens = [UserTokenType.USERNAME] if self.uses_username else [UserTokenType.ANONYMOUS]
        return ServerConfig(
            identity=self.identities.server,
            endpoints=[
                endpoint_offer(MessageSecurityMode.SIGN, BASIC256SHA256_URI, tokens),
                endpoint_offer(MessageSecurityMode.SIGN_AND_ENCRYPT, BASIC256SHA256_URI, tokens),
            ],
            trust_policy=self.server_policy,
            trust_store=self.server_store,
            users={self.username: self.password} if self.uses_username else {},
            anonymous_allowed=not self.uses_username,
            nodes=default_nodes(self.config),
            host='127.0.0.1',
            port=0,
            application_name='TrustKit Victim Server',
            bcrypt_rounds=getattr(self.config, 'BCRYPT_ROUNDS', 12),
            token_lifetime_ms=getattr(self.config, 'TOKEN_LIFETIME_MS', 3_600_000),
            socket_timeout=getattr(self.config, 'SOCKET_TIMEOUT', 10.0),
        )

    def victim_client(self) -> UAClient:
        index = self._run_index
        self._run_index += 1
        config = ClientConfig(
            identity=self.identities.client,
            trust_policy=self.client_policy,
            trust_store=self.client_store,
            username=self.username if self.uses_username else None,
            password=self.password if self.uses_username else None,
            application_name='TrustKit Victim Client',
            timeout=getattr(self.config, 'SOCKET_TIMEOUT', 10.0),
        )
        transcript = Transcript(self.transcript_dir / f"victim-client-{index:03d}.tktr",
                                label=f"victim-client-{index:03d}")
        return UAClient(config, transcript=transcript)

    def drive_victim_client(self, url: str) -> VictimRun:
        """Découverte, connexion, lecture du capteur et écriture de la consigne."""
        run = VictimRun(url)
        client = self.victim_client()
        try:
            with client.connect(url=url) as session:
                for node_id in (SENSOR_NODE, SETPOINT_NODE):
                    run.values[node_id] = session.read(node_id)
                run.write_status = session.write(SETPOINT_NODE, run.values[SETPOINT_NODE] + SETPOINT_STEP)
            run.completed = is_good(run.write_status)
        except TrustRejected as e:
            run.rejected_locally = True
            run.error = str(e)
        except TrustKitError as e:
            run.error = f"{type(e).__name__}: {e}"
        self.runs.append(run)
        if run.completed:
            self.logger.debug(f"✅ Cycle victime terminé via {url}: {run.values}")
        else:
            self.logger.debug(f"🚫 Cycle victime interrompu via {url}: {run.error}")
        return run

    def discover_target(self, server: UAServer) -> TargetDescriptor:
        host, port = parse_endpoint_url(server.url)
        return OpcScanner(self.config).probe(host, port)

    # === OPÉRATEUR SIMULÉ ===

    def promote_pending(self, round_index: int) -> int:
        """Promeut chaque certificat refusé des magasins RejectedStore."""
        promoted = 0
        for side, store, policy in ((Side.SERVER, self.server_store, self.server_policy),
                                    (Side.CLIENT, self.client_store, self.client_policy)):
            if policy.kind != TrustPolicyKind.REJECTED_STORE:
                continue
            for record in store.rejected:
                store.promote(record.thumbprint)
                self.promotions.append((side, record, round_index))
                promoted += 1
        if promoted:
            self.logger.info(f"📋 Opérateur simulé: {promoted} certificat(s) promu(s) (tour {round_index})")
        return promoted

    def _with_promotions(self, attempt: Callable[[], bool]):
        """Rejoue une tentative tant qu'un refus a laissé un certificat à promouvoir."""
        for round_index in range(self.promotion_rounds + 1):
            if attempt() or round_index == self.promotion_rounds:
                return
            if not self.promote_pending(round_index + 1):
                return

    # === ATTAQUES ===

    def _run_rogue_server(self, server: UAServer) -> Tuple[AttackOutcome, list]:
        target = self.phase('découverte', self.discover_target, server)
        rogue = RogueServer(target, generator=self._generator(), transcript_dir=self.transcript_dir,
                            config_class=self.config)
        with rogue:
            self._with_promotions(lambda: self.phase('victime cliente', self.drive_victim_client, rogue.url).completed)
            return rogue.outcome(), list(rogue.credentials)

    def _run_middleperson(self, server: UAServer) -> Tuple[AttackOutcome, list]:
        target = self.phase('découverte', self.discover_target, server)
        attacker = Middleperson(target, generator=self._generator(), manipulation=self.manipulation,
                                forwarding_only=self.spec.forwarding_only,
                                impersonate=self.identities.client.der, transcript_dir=self.transcript_dir,
                                config_class=self.config,
                                timeout=getattr(self.config, 'SOCKET_TIMEOUT', 10.0))
        with attacker:
            def attempt() -> bool:
                self.phase('victime cliente', self.drive_victim_client, attacker.url)
                return attacker.outcome().has(EvidenceKind.SESSION_REPLAYED)
            self._with_promotions(attempt)
            return attacker.outcome(), list(attacker.credentials)

    def _run_rogue_client(self, server: UAServer) -> Tuple[AttackOutcome, list]:
        target = self.phase('découverte', self.discover_target, server)
        identity = None
        if self.spec.server_profile == Profile.P3_REJECTED_STORE_PROMOTION:
            identity = clone_certificate(self.identities.client.der)
        key_bits = getattr(self.config, 'KEY_BITS', 2048)
        outcomes: List[AttackOutcome] = []

        def attempt() -> bool:
            attacker = RogueClient(target, identity=identity, seed=self.spec.seed, key_bits=key_bits,
                                   transcript_dir=self.transcript_dir, label=f"rogue-client-{len(outcomes):03d}",
                                   timeout=getattr(self.config, 'SOCKET_TIMEOUT', 10.0))
            outcomes.append(self.phase('rogue client', attacker.run))
            return outcomes[-1].result == AttackResult.VULNERABLE

        self._with_promotions(attempt)
        self.phase('victime cliente', self.drive_victim_client, server.url)
        outcome = outcomes[-1]
        for earlier in outcomes[:-1]:
            outcome.notes[:0] = earlier.notes
        return outcome, []

    def _generator(self) -> FabricatedDataGenerator:
        return FabricatedDataGenerator(
            mode=getattr(self.config, 'FABRICATED_MODE', 'last_seen'),
            constant=getattr(self.config, 'FABRICATED_CONSTANT', 0.0),
            seed=self.spec.seed,
        )

    # === PREUVES DU HARNAIS ===

    def _record_harness_evidence(self, outcome: AttackOutcome):
        for side, record, round_index in self.promotions:
            outcome.add(EvidenceKind.CERTIFICATE_PROMOTED, side, thumbprint=record.hex_thumbprint,
                        application_uri=record.application_uri, round=round_index)

        legitimate = {self.identities.server.record.hex_thumbprint, self.identities.client.record.hex_thumbprint}
        for side, store in ((Side.SERVER, self.server_store), (Side.CLIENT, self.client_store)):
            seen = set()
            for decision in store.decisions:
                key = (decision.thumbprint, decision.basis)
                if not decision.accepted or decision.thumbprint in legitimate or key in seen:
                    continue
                seen.add(key)
                outcome.add(EvidenceKind.ACCEPTANCE_OBSERVED, side, thumbprint=decision.thumbprint,
                            application_uri=decision.application_uri, basis=decision.basis,
                            policy=decision.policy)

        if outcome.result == AttackResult.VULNERABLE and not any(e.side == PRIMARY_SIDE[outcome.attack]
                                                                 for e in outcome.evidence):
            outcome.note("Aucune preuve du côté visé par l'attaque")

    def _findings(self, outcome: AttackOutcome, pitfall: Optional[PitfallClass]) -> List[Dict[str, Any]]:
        if pitfall is None:
            return []
        side = PRIMARY_SIDE[outcome.attack]
        profile = self.spec.server_profile if side == Side.SERVER else self.spec.client_profile
        return [{
            'side': side.value,
            'profile': profile.value,
            'pitfall': pitfall.numeral,
            'label': pitfall.label,
            'evidence': sorted({e.kind.value for e in outcome.evidence if e.side == side}),
        }]

    # === EXÉCUTION ===

    def run(self) -> AssessmentReport:
        """
        Raises:
            HarnessTimeout: une phase dépasse le délai configuré
            HarnessError: échec de mise en place (port, identité)
        """
        self.logger.info(f"🎯 Scénario {self.spec.label}")
        if self.spec.forwarding_only:
            self.notes.append("Middleperson sans authentification UserName: variante relais seul, "
                              "aucun identifiant rejoué")
        flows = {
            AttackKind.ROGUE_SERVER: self._run_rogue_server,
            AttackKind.MIDDLEPERSON: self._run_middleperson,
            AttackKind.ROGUE_CLIENT: self._run_rogue_client,
        }
        try:
            server = UAServer(self.victim_server_config(), transcript_dir=self.transcript_dir,
                              label='victim-server')
            with PerformanceLogger(f"scénario {scenario_slug(self.spec)}"), server:
                outcome, credentials = flows[self.spec.attack](server)
                stored_setpoint = server.node_store.value_of(SETPOINT_NODE)
        except HarnessError:
            raise
        except TrustKitError as e:
            raise HarnessError(f"Scénario {self.spec.label} interrompu: {e}") from e
        finally:
            self._executor.shutdown(wait=False)

        self._record_harness_evidence(outcome)
        pitfall = classify([outcome], self.spec)
        for run in self.runs:
            if not run.completed:
                self.notes.append(f"Victime cliente via {run.url}: {run.error}")
        self.notes.append(f"Consigne stockée par le serveur victime en fin de scénario: {stored_setpoint}")

        report = AssessmentReport(
            scenario=self.spec,
            outcomes=[outcome],
            pitfall_class=pitfall,
            credentials=credentials,
            transcripts=sorted(str(p) for p in self.transcript_dir.glob('*.tktr')),
            toolkit_version=getattr(self.config, 'TOOLKIT_VERSION', '1.0.0'),
            findings=self._findings(outcome, pitfall),
            notes=self.notes,
        )
        level = '🎯' if report.result == AttackResult.VULNERABLE else '✅'
        self.logger.info(f"{level} {self.spec.label}: {report.result.value}"
                         + (f" (classe {pitfall.numeral})" if pitfall else ''))
        return report


@log_function_call
def run_scenario(spec: ScenarioSpec, config_class=None, transcript_dir: Optional[Union[str, Path]] = None,
                 manipulation: Optional[Manipulation] = None,
                 identities: Optional[VictimIdentities] = None) -> AssessmentReport:
    """
    Raises:
        HarnessTimeout, HarnessError
    """
    return ScenarioRunner(spec, config_class, transcript_dir, manipulation, identities).run()


def matrix_specs(user_auth: UserAuth = UserAuth.USERNAME, seed: int = 0) -> List[ScenarioSpec]:
    """Matrice complète: 4 profils serveur x 4 profils client x 3 attaques."""
    return [
        ScenarioSpec(server_profile, client_profile, user_auth, attack, seed)
        for attack, server_profile, client_profile in product(AttackKind, Profile, Profile)
    ]


def run_matrix(specs: Optional[List[ScenarioSpec]] = None, config_class=None,
               transcript_dir: Optional[Union[str, Path]] = None, workers: Optional[int] = None,
               identities: Optional[VictimIdentities] = None) -> List[AssessmentReport]:
    """
    Exécute une liste de scénarios (la matrice complète par défaut), en
    parallèle si workers > 1. Une erreur de harnais devient un rapport
    en erreur; l'ordre des rapports suit celui des scénarios.
    """
    specs = specs if specs is not None else matrix_specs()
    workers = workers or getattr(config_class, 'MATRIX_WORKERS', 1)
    identities = identities or VictimIdentities.generate(config_class)
    base = Path(transcript_dir) if transcript_dir else Path(tempfile.mkdtemp(prefix='trustkit-matrix-'))

    def run_one(spec: ScenarioSpec) -> AssessmentReport:
        try:
            return run_scenario(spec, config_class, base, identities=identities)
        except HarnessError as e:
            return AssessmentReport(scenario=spec, toolkit_version=getattr(config_class, 'TOOLKIT_VERSION', '1.0.0'),
                                    error=str(e))

    with PerformanceLogger(f"matrice de {len(specs)} scénario(s)"):
        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            return list(executor.map(run_one, specs))
