#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
POINT D'ENTRÉE PRINCIPAL - OPC UA TRUSTKIT
Fichier: run.py

Interface en ligne de commande: sélection de l'attaque ou de la pièce du
harnais à lancer. Codes de sortie: 0 = exécuté et Secure, 2 = exécuté et
vulnérabilité trouvée (ou Inconclusive avec identifiant capturé ou canal
non autorisé accepté), 1 = erreur (configuration, réseau, harnais) ou
Inconclusive sans exposition.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional

# Ajouter le répertoire racine au Python path
root_dir = Path(__file__).parent.absolute()
sys.path.insert(0, str(root_dir))

from app import ToolkitContext, __version__, create_toolkit  # noqa: E402
from app.config.profiles import (  # noqa: E402
    TRUST_PROFILES, load_client_config, load_scenario_file, load_server_config, trust_policy_for_name
)
from app.exceptions import ConfigurationError, TrustKitError  # noqa: E402
from app.models.assessment import (  # noqa: E402
    EXIT_ERROR, EXIT_SECURE, AttackKind, AttackOutcome, Profile, ScenarioSpec, UserAuth, matrix_exit_code
)
from app.models.channel import BASIC256SHA256_URI, POLICY_NONE_URI  # noqa: E402
from app.models.endpoint import DEFAULT_PORT, endpoint_offer, parse_endpoint_url  # noqa: E402
from app.models.node_store import SENSOR_NODE, SETPOINT_NODE, STATUS_NODE  # noqa: E402
from app.models.settings import ClientConfig, ServerConfig  # noqa: E402
from app.protocol.structures import MessageSecurityMode, UserTokenType  # noqa: E402
from app.utils.validators import (  # noqa: E402
    validate_endpoint_url, validate_listen_address, validate_profile_name, validate_scan_target,
    validate_scenario_spec, validate_transcript_path
)

ATTACK_NAMES = {'rogue-server': AttackKind.ROGUE_SERVER, 'rogue-client': AttackKind.ROGUE_CLIENT,
                'mitm': AttackKind.MIDDLEPERSON}


def print_startup_banner(command: str):
    banner = f"""
{'=' * 60}
🔐  OPC UA TRUSTKIT {__version__} - {command}
{'=' * 60}
"""
    print(banner, file=sys.stderr)


def checked(validation: dict, subject: str) -> dict:
    """
    Affiche les avertissements d'une validation.

    Raises:
        ConfigurationError: validation en erreur
    """
    for warning in validation['warnings']:
        print(f"⚠️ {subject}: {warning}", file=sys.stderr)
    if not validation['valid']:
        raise ConfigurationError(f"{subject}: {'; '.join(validation['errors'])}")
    return validation


def parse_listen(value: str) -> tuple:
    """'hôte:port', ':port' ou 'port'."""
    host, _, port = value.rpartition(':')
    validation = validate_listen_address(f"{host or '127.0.0.1'}:{port}")
    if not validation['valid']:
        raise argparse.ArgumentTypeError(f"adresse d'écoute invalide: {value} ({'; '.join(validation['errors'])})")
    return validation['host'], validation['port']


def emit(content: bytes, out: Optional[str]):
    """Écrit un rendu sur la sortie standard ou dans --out."""
    if out:
        from app.services.report_service import write_report
        write_report(content, out)
    else:
        sys.stdout.buffer.write(content)
        sys.stdout.flush()


def wait_for(duration: float, stop_when=None):
    """Attend la fin de la durée (0 = jusqu'à Ctrl+C) ou la condition d'arrêt."""
    deadline = time.monotonic() + duration if duration else None
    try:
        while deadline is None or time.monotonic() < deadline:
            if stop_when is not None and stop_when():
                return
            time.sleep(0.2)
    except KeyboardInterrupt:
        print("\n🛑 Arrêt demandé par l'utilisateur", file=sys.stderr)


def discover_target(args, ctx: ToolkitContext):
    from app.services.scanner_service import OpcScanner

    if not args.target:
        raise ConfigurationError("--target opc.tcp://hôte:port est requis")
    checked(validate_endpoint_url(args.target), '--target')
    host, port = parse_endpoint_url(args.target)
    descriptor = OpcScanner(ctx.config).probe(host, port)
    print(f"🎯 Cible {descriptor.url}: {descriptor.application.application_uri} "
          f"({len(descriptor.endpoints)} endpoints)", file=sys.stderr)
    return descriptor


def outcome_exit_code(outcome: AttackOutcome) -> int:
    return outcome.exit_code


# === VERBES ===

def cmd_scan(args, ctx: ToolkitContext) -> int:
    from app.services.report_service import render_scan
    from app.services.scanner_service import scan

    targets = list(args.targets) + ([args.target] if args.target else [])
    if not targets:
        raise ConfigurationError("Au moins une cible est requise")
    for target in targets:
        checked(validate_scan_target(target), f"cible {target}")
    report = scan(targets, default_port=args.port, timeout=args.timeout, config_class=ctx.config)
    emit(render_scan(report, args.format), args.out)
    return EXIT_SECURE


def cmd_rogue_server(args, ctx: ToolkitContext) -> int:
    from app.services.fabricated_data import FabricatedDataGenerator
    from app.services.report_service import render_outcome
    from app.services.rogue_server import rogue_server

    target = discover_target(args, ctx)
    generator = FabricatedDataGenerator(mode=args.fabricated_mode or ctx.config.FABRICATED_MODE,
                                        constant=ctx.config.FABRICATED_CONSTANT, seed=args.seed)
    server = rogue_server(target, args.listen, generator=generator,
                          transcript_dir=args.transcript_dir or ctx.transcript_dir, config_class=ctx.config)
    print(f"🎭 Rogue Server sur {server.url} (Ctrl+C pour arrêter)", file=sys.stderr)
    try:
        wait_for(args.duration, (lambda: server.credentials) if args.until_capture else None)
    finally:
        server.stop()
    outcome = server.outcome()
    emit(render_outcome(outcome, args.format, args.show_secrets, server.credentials, __version__), args.out)
    return outcome_exit_code(outcome)


def cmd_rogue_client(args, ctx: ToolkitContext) -> int:
    from app.services.report_service import render_outcome
    from app.services.rogue_client import rogue_client

    target = discover_target(args, ctx)
    credentials = (args.username, args.password or '') if args.username else None
    impersonate = Path(args.impersonate).read_bytes() if args.impersonate else None
    outcome = rogue_client(target, credentials, impersonate=impersonate,
                           transcript_dir=args.transcript_dir or ctx.transcript_dir, seed=args.seed,
                           timeout=ctx.config.SOCKET_TIMEOUT, key_bits=ctx.config.KEY_BITS)
    emit(render_outcome(outcome, args.format, args.show_secrets, version=__version__), args.out)
    return outcome_exit_code(outcome)


def cmd_mitm(args, ctx: ToolkitContext) -> int:
    from app.services.middleperson import Manipulation, middleperson
    from app.services.report_service import render_outcome

    target = discover_target(args, ctx)
    manipulation = Manipulation.negate(args.negate) if args.negate else None
    impersonate = Path(args.impersonate).read_bytes() if args.impersonate else None
    attacker = middleperson(target, args.listen, manipulation=manipulation, impersonate=impersonate,
                            transcript_dir=args.transcript_dir or ctx.transcript_dir, config_class=ctx.config,
                            timeout=ctx.config.SOCKET_TIMEOUT)
    print(f"🎭 Middleperson sur {attacker.url} (Ctrl+C pour arrêter)", file=sys.stderr)
    try:
        wait_for(args.duration)
    finally:
        attacker.stop()
    outcome = attacker.outcome()
    emit(render_outcome(outcome, args.format, args.show_secrets, attacker.credentials, __version__), args.out)
    return outcome_exit_code(outcome)


def scenario_from_args(args) -> ScenarioSpec:
    return ScenarioSpec(
        server_profile=Profile(args.server_profile),
        client_profile=Profile(args.client_profile),
        user_auth=UserAuth(args.auth),
        attack=AttackKind(args.attack),
        seed=args.seed or 0,
        server_auto_accept=not args.server_flag_off,
        client_auto_accept=not args.client_flag_off,
    )


def cmd_assess(args, ctx: ToolkitContext) -> int:
    from app.services.report_service import render_matrix, render_report
    from app.services.scenario_service import matrix_specs, run_matrix, run_scenario

    transcript_dir = args.transcript_dir or ctx.transcript_dir
    if args.matrix or args.scenario_file:
        specs = load_scenario_file(args.scenario_file) if args.scenario_file else matrix_specs(
            UserAuth(args.auth), args.seed or 0)
        for spec in specs:
            checked(validate_scenario_spec(spec), spec.label)
        reports = run_matrix(specs, ctx.config, transcript_dir, workers=args.workers)
        emit(render_matrix(reports, args.format, args.show_secrets), args.out)
        return matrix_exit_code(reports)

    if not (args.server_profile and args.client_profile and args.attack):
        raise ConfigurationError("--server-profile, --client-profile et --attack sont requis (ou --matrix)")
    spec = scenario_from_args(args)
    checked(validate_scenario_spec(spec), spec.label)
    report = run_scenario(spec, ctx.config, transcript_dir)
    emit(render_report(report, args.format, args.show_secrets), args.out)
    return report.exit_code


def default_victim_server_config(args, ctx: ToolkitContext) -> ServerConfig:
    from app.services.pki_service import TrustStore, load_or_create_identity

    config = ctx.config
    identity = load_or_create_identity(ctx.pki_dir / 'identities', 'victim-server', 'TrustKit Victim Server',
                                       config.HARNESS_SERVER_URI, config.CERTIFICATE_VALIDITY_DAYS, config.KEY_BITS)
    tokens = [UserTokenType.ANONYMOUS, UserTokenType.USERNAME]
    host, port = args.listen or (config.LISTEN_HOST, config.DEFAULT_PORT)
    return ServerConfig(
        identity=identity,
        endpoints=[
            endpoint_offer(MessageSecurityMode.NONE, POLICY_NONE_URI, tokens),
            endpoint_offer(MessageSecurityMode.SIGN, BASIC256SHA256_URI, tokens),
            endpoint_offer(MessageSecurityMode.SIGN_AND_ENCRYPT, BASIC256SHA256_URI, tokens),
        ],
        trust_policy=trust_policy_for_name(args.profile or 'secure'),
        trust_store=TrustStore(ctx.pki_dir / 'victim-server'),
        users={config.HARNESS_USERNAME: config.HARNESS_PASSWORD},
        anonymous_allowed=True,
        host=host,
        port=port,
        application_name='TrustKit Victim Server',
        bcrypt_rounds=config.BCRYPT_ROUNDS,
        token_lifetime_ms=config.TOKEN_LIFETIME_MS,
    )


def cmd_serve_victim(args, ctx: ToolkitContext) -> int:
    from app.services.server_service import serve

    if args.config:
        server_config = load_server_config(args.config, ctx.config)
        if args.listen:
            server_config.host, server_config.port = args.listen
        if args.profile:
            server_config.trust_policy = trust_policy_for_name(args.profile)
    else:
        server_config = default_victim_server_config(args, ctx)
    server = serve(server_config, args.transcript_dir or ctx.transcript_dir, label='victim-server')
    print(f"📡 Serveur victime sur {server.url} ({server_config.trust_policy.describe()}), Ctrl+C pour arrêter",
          file=sys.stderr)
    try:
        wait_for(args.duration)
    finally:
        server.stop()
        server.trust_store.persist()
    return EXIT_SECURE


def cmd_run_victim_client(args, ctx: ToolkitContext) -> int:
    from app.services.client_service import UAClient
    from app.services.pki_service import TrustStore, load_or_create_identity
    from app.services.transcript import Transcript

    config = ctx.config
    if not args.target:
        raise ConfigurationError("--target opc.tcp://hôte:port est requis")
    if args.config:
        client_config = load_client_config(args.config, config)
        if args.profile:
            client_config.trust_policy = trust_policy_for_name(args.profile)
    else:
        identity = load_or_create_identity(ctx.pki_dir / 'identities', 'victim-client', 'TrustKit Victim Client',
                                           config.HARNESS_CLIENT_URI, config.CERTIFICATE_VALIDITY_DAYS,
                                           config.KEY_BITS)
        client_config = ClientConfig(
            identity=identity,
            trust_policy=trust_policy_for_name(args.profile or 'secure'),
            trust_store=TrustStore(ctx.pki_dir / 'victim-client'),
            username=args.username or config.HARNESS_USERNAME,
            password=args.password if args.username else config.HARNESS_PASSWORD,
            application_name='TrustKit Victim Client',
            timeout=config.SOCKET_TIMEOUT,
        )

    transcript_dir = Path(args.transcript_dir or ctx.transcript_dir)
    client = UAClient(client_config, Transcript(transcript_dir / 'victim-client.tktr', label='victim-client'))
    try:
        with client.connect(url=args.target) as session:
            for node_id in (SENSOR_NODE, SETPOINT_NODE, STATUS_NODE):
                print(f"📋 {node_id} = {session.read(node_id)}")
            if args.write is not None:
                status = session.write(SETPOINT_NODE, args.write)
                print(f"📝 {SETPOINT_NODE} <- {args.write}: 0x{status:08X}")
    finally:
        client.trust_store.persist()
    return EXIT_SECURE


def cmd_transcript(args, ctx: ToolkitContext) -> int:
    from app.services.report_service import render_transcript
    from app.services.transcript import Transcript

    for path in args.files:
        checked(validate_transcript_path(path), path)
        emit(render_transcript(Transcript.read(path), args.format), args.out)
    return EXIT_SECURE


# === ANALYSE DES ARGUMENTS ===

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--target', help="URL opc.tcp://hôte:port de la cible")
    common.add_argument('--listen', type=parse_listen, help="adresse d'écoute hôte:port")
    common.add_argument('--profile', choices=sorted(TRUST_PROFILES), help='profil de confiance')
    common.add_argument('--config', help='fichier de configuration JSON')
    common.add_argument('--transcript-dir', help='dossier des transcriptions')
    common.add_argument('--show-secrets', action='store_true', help='affiche les mots de passe capturés')
    common.add_argument('--format', choices=('human', 'machine'), default='human')
    common.add_argument('--out', help='fichier de sortie (défaut: sortie standard)')
    common.add_argument('--env', choices=('development', 'production', 'testing'),
                        help='configuration (défaut: TRUSTKIT_ENV)')
    common.add_argument('--log-level', choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    common.add_argument('--seed', type=int, default=None)

    parser = argparse.ArgumentParser(prog='run.py', description='OPC UA TrustKit - évaluation de la confiance '
                                                                'applicative OPC UA')
    parser.add_argument('--version', action='version', version=f"OPC UA TrustKit {__version__}")
    subparsers = parser.add_subparsers(dest='command', required=True)

    sparser = subparsers.add_parser('scan', parents=[common], help='repère les serveurs OPC UA')
    sparser.add_argument('targets', nargs='*', help='hôte, hôte:port, opc.tcp://... ou bloc CIDR')
    sparser.add_argument('--port', type=int, default=DEFAULT_PORT)
    sparser.add_argument('--timeout', type=float, default=None)
    sparser.set_defaults(handler=cmd_scan)

    sparser = subparsers.add_parser('rogue-server', parents=[common], help='clone un serveur et capture')
    sparser.add_argument('--duration', type=float, default=0, help='secondes (0 = jusqu\'à Ctrl+C)')
    sparser.add_argument('--until-capture', action='store_true', help='arrêt au premier identifiant capturé')
    sparser.add_argument('--fabricated-mode', choices=('constant', 'last_seen', 'random_walk'))
    sparser.set_defaults(handler=cmd_rogue_server, listen_default=('0.0.0.0', DEFAULT_PORT))

    sparser = subparsers.add_parser('rogue-client', parents=[common], help='certificat non approuvé')
    sparser.add_argument('--username')
    sparser.add_argument('--password')
    sparser.add_argument('--impersonate', help='certificat DER légitime à imiter')
    sparser.set_defaults(handler=cmd_rogue_client)

    sparser = subparsers.add_parser('mitm', parents=[common], help='Middleperson avec rejeu des identifiants')
    sparser.add_argument('--duration', type=float, default=0)
    sparser.add_argument('--negate', nargs='*', metavar='NODE', help='nœuds dont la valeur lue est inversée')
    sparser.add_argument('--impersonate', help='certificat DER du client légitime à imiter')
    sparser.set_defaults(handler=cmd_mitm, listen_default=('0.0.0.0', DEFAULT_PORT))

    sparser = subparsers.add_parser('assess', parents=[common], help='scénario ou matrice sur boucle locale')
    sparser.add_argument('--attack', choices=[a.value for a in AttackKind])
    sparser.add_argument('--server-profile', choices=[p.value for p in Profile])
    sparser.add_argument('--client-profile', choices=[p.value for p in Profile])
    sparser.add_argument('--auth', choices=[u.value for u in UserAuth], default=UserAuth.USERNAME.value)
    sparser.add_argument('--server-flag-off', action='store_true', help='P2 avec auto_accept=false côté serveur')
    sparser.add_argument('--client-flag-off', action='store_true', help='P2 avec auto_accept=false côté client')
    sparser.add_argument('--matrix', action='store_true', help='matrice complète 4x4x3')
    sparser.add_argument('--scenario-file', help='fichier JSON de scénarios')
    sparser.add_argument('--workers', type=int, default=None)
    sparser.set_defaults(handler=cmd_assess)

    sparser = subparsers.add_parser('serve-victim', parents=[common], help='serveur victime')
    sparser.add_argument('--duration', type=float, default=0)
    sparser.set_defaults(handler=cmd_serve_victim)

    sparser = subparsers.add_parser('run-victim-client', parents=[common], help='un cycle du client victime')
    sparser.add_argument('--username')
    sparser.add_argument('--password')
    sparser.add_argument('--write', type=float, default=None, help='valeur écrite dans la consigne')
    sparser.set_defaults(handler=cmd_run_victim_client)

    sparser = subparsers.add_parser('transcript', parents=[common], help='liste une transcription')
    sparser.add_argument('files', nargs='+')
    sparser.set_defaults(handler=cmd_transcript)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Fonction principale: analyse les arguments, initialise la boîte à
    outils et exécute le verbe choisi.

    Returns:
        int: code de sortie (0, 1 ou 2)
    """
    args = build_parser().parse_args(argv)
    if args.listen is None and getattr(args, 'listen_default', None):
        args.listen = args.listen_default

    try:
        ctx = create_toolkit(args.env, log_level=args.log_level)
    except ValueError as e:
        print(f"❌ Erreur de configuration: {e}", file=sys.stderr)
        return EXIT_ERROR

    print_startup_banner(args.command)
    try:
        if args.profile:
            checked(validate_profile_name(args.profile), '--profile')
        return args.handler(args, ctx)
    except ConfigurationError as e:
        print(f"❌ Configuration: {e}", file=sys.stderr)
        return EXIT_ERROR
    except TrustKitError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        ctx.logger.debug("Détail de l'erreur", exc_info=True)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("\n👋 Arrêt demandé par l'utilisateur", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        print(f"\n❌ ERREUR CRITIQUE: {type(e).__name__}: {e}", file=sys.stderr)
        if ctx.config.DEBUG:
            import traceback
            traceback.print_exc()
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
