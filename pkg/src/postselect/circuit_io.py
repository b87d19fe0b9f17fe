'''
Plain-text serialization of HybridCircuit

    # comment
    QUBITS 4
    GATE 0 1 <16 complex entries, row-major>
    GATE 2 <4 complex entries>
    MEAS 3 2 1        # after 3 gates, qubit 2, forced outcome 1
'''

import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from .blockenc import Gate, HybridCircuit, Measurement
from .errors import DomainError

logger = logging.getLogger(__name__)


def _format_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def circuit_to_text(circuit: HybridCircuit) -> str:
    lines = [f"QUBITS {circuit.n_qubits}"]
    pending = sorted(circuit.measurements, key=lambda m: m.time)
    for gate in circuit.gates:
        entries = " ".join(_format_complex(z) for z in np.asarray(gate.matrix).reshape(-1))
        qubits = " ".join(str(q) for q in gate.qubits)
        lines.append(f"GATE {qubits} {entries}")
    for meas in pending:
        lines.append(f"MEAS {meas.time} {meas.qubit} {meas.outcome}")
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> HybridCircuit:
    n_qubits = None
    gates: List[Gate] = []
    measurements: List[Measurement] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0].upper()
        try:
            if keyword == 'QUBITS':
                n_qubits = int(tokens[1])
            elif keyword == 'GATE':
                args = tokens[1:]
                if len(args) == 1 + 4:
                    arity = 1
                elif len(args) == 2 + 16:
                    arity = 2
                else:
                    raise DomainError("GATE needs 1 qubit + 4 entries or 2 qubits + 16 entries")
                qubits = tuple(int(q) for q in args[:arity])
                entries = np.array([complex(tok) for tok in args[arity:]])
                size = 2 ** arity
                gates.append(Gate(entries.reshape(size, size), qubits))
            elif keyword == 'MEAS':
                time, qubit, outcome = (int(tok) for tok in tokens[1:4])
                measurements.append(Measurement(time, qubit, outcome))
            else:
                raise DomainError(f"Unknown keyword {tokens[0]}")
        except (IndexError, ValueError) as e:
            raise DomainError(f"Line {lineno}: {e}") from e

    if n_qubits is None:
        raise DomainError("Circuit text lacks a QUBITS line")
    return HybridCircuit(n_qubits, tuple(gates), tuple(measurements))


def write_circuit(circuit: HybridCircuit, path: Union[str, Path]):
    Path(path).write_text(circuit_to_text(circuit), encoding='utf-8')
    logger.info(f"Wrote circuit with {len(circuit.gates)} gates and {circuit.n_meas} measurements to {path}")


def read_circuit(path: Union[str, Path]) -> HybridCircuit:
    return circuit_from_text(Path(path).read_text(encoding='utf-8'))
