import duckdb
import json
import logging
import os
import polars

from dataclasses import asdict
from dataclasses import dataclass
from queue import Empty
from queue import Queue
from threading import Lock

import pinwheelkit.ddbdef

from pinwheelkit.errors import CampaignError
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import parse_ratio

STORE_FORMAT = 'pinwheelkit.certificates/1'

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Certificate:
    spec: str
    kind: str
    periods: tuple
    verdict: str
    schedule: dict | None = None
    solver: str | None = None
    elapsed: float = 0.0
    states: int = 0

    @property
    def key(self):
        return tuple(self.periods)

    def instance(self):
        return TaskPeriods(self.kind, tuple(parse_ratio(p) for p in self.periods))

    def to_dict(self):
        data = asdict(self)
        data['periods'] = list(self.periods)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            data['spec'],
            data['kind'],
            tuple(data['periods']),
            data['verdict'],
            data.get('schedule'),
            data.get('solver'),
            data.get('elapsed', 0.0),
            data.get('states', 0)
        )


def _scan_store(filename):
    # a crash during flush can leave the final line torn; earlier lines are complete
    header = None
    certificates = []
    offset = 0

    with open(filename, 'rb') as store_file:
        lines = store_file.readlines()

    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line:
            try:
                if not raw.endswith(b'\n'):
                    raise ValueError('unterminated record')
                record = json.loads(line)
            except ValueError as error:
                if number == len(lines):
                    logger.warning(f"{filename}:{number}: dropping torn final record ({error})")
                    return header, certificates, offset, True
                raise CampaignError(f"{filename}:{number}: unreadable record ({error})")

            if header is None:
                if record.get('format') != STORE_FORMAT:
                    raise CampaignError(f"{filename} is not a certificate store (format {record.get('format')!r})")
                header = record
            else:
                certificates.append(Certificate.from_dict(record))

        offset += len(raw)

    return header, certificates, offset, False


def read_store(filename):
    """Returns (header, certificates) of a JSON Lines certificate store.

    A torn final line is skipped with a warning, any other unreadable line
    raises CampaignError.
    """
    header, certificates, _, _ = _scan_store(filename)
    if header is None:
        raise CampaignError(f"{filename} is empty")

    return header, certificates


class CertificateStore:
    """Append-only certificate file for one family.

    Certificates are queued by `put` and written by `flush`; only one
    flush runs at a time so lines never interleave.
    """

    def __init__(self, filename, spec_name, fingerprint):
        self._filename = filename
        self._queue = Queue()
        self._lock = Lock()
        self._certificates = dict()

        header = None
        if os.path.exists(filename):
            header, certificates, size, torn = _scan_store(filename)
            if torn:
                with open(filename, 'r+b') as store_file:
                    store_file.truncate(size)

        if header is not None:
            if header.get('fingerprint') != fingerprint:
                raise CampaignError(f"{filename} belongs to family {header.get('spec')} "
                                    f"with a different definition; refusing to mix certificates")

            for certificate in certificates:
                self._certificates[certificate.key] = certificate

            logger.info(f"resuming {spec_name} from {filename} with {len(self._certificates)} stored certificates")
        else:
            with open(filename, 'w') as store_file:
                header = {'format': STORE_FORMAT, 'spec': spec_name, 'fingerprint': fingerprint}
                store_file.write(json.dumps(header, sort_keys=True) + '\n')

    def __contains__(self, key):
        return tuple(key) in self._certificates

    def __getitem__(self, key):
        return self._certificates[tuple(key)]

    def __len__(self):
        return len(self._certificates)

    def certificates(self):
        return iter(self._certificates.values())

    def put(self, certificate):
        self._certificates[certificate.key] = certificate
        self._queue.put(certificate)

    def flush(self):
        with self._lock:
            lines = []
            while True:
                try:
                    lines.append(json.dumps(self._queue.get_nowait().to_dict(), sort_keys=True))
                except Empty:
                    break

            if lines:
                with open(self._filename, 'a') as store_file:
                    store_file.write('\n'.join(lines) + '\n')


def load_report(filename, database_filename=None):
    """Loads a certificate store into duckdb and returns per-verdict aggregates."""
    header, certificates = read_store(filename)

    records = []
    for certificate in certificates:
        cycle = (certificate.schedule or {}).get('cycle')
        records.append((
            certificate.spec,
            certificate.kind,
            ','.join(certificate.periods),
            len(certificate.periods),
            certificate.verdict,
            certificate.solver,
            None if cycle is None else len(cycle),
            float(certificate.elapsed),
            int(certificate.states)
        ))

    headers = {
        'spec': polars.Utf8,
        'kind': polars.Utf8,
        'periods': polars.Utf8,
        'jobs': polars.Int32,
        'verdict': polars.Utf8,
        'solver': polars.Utf8,
        'cycle_length': polars.Int32,
        'elapsed': polars.Float64,
        'states': polars.Int64
    }
    df = polars.DataFrame(records, schema=headers, orient='row')

    connection = duckdb.connect(database=database_filename or ':memory:')
    try:
        connection.execute(pinwheelkit.ddbdef.schema['certificates'])
        connection.execute('DELETE FROM certificates WHERE spec = ?', [header['spec']])
        connection.sql('INSERT INTO certificates SELECT * FROM df')

        logger.info(f"loaded {len(df)} certificates from {filename}")
        return connection.sql(pinwheelkit.ddbdef.summary).pl()
    finally:
        connection.close()
