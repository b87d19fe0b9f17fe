'''
CSV, SVG and console output of experiment results
'''

import logging
import os
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from colorama import Fore, Style  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.15g'
ASSERTION_COLUMNS = ['name', 'relation', 'expected', 'measured', 'passed']


def write_table(df: pd.DataFrame, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f'{name}.csv')
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def assertion_table(assertions: Sequence[Dict]) -> pd.DataFrame:
    return pd.DataFrame(list(assertions), columns=ASSERTION_COLUMNS)


def save_svg(fig, out_dir: str, name: str) -> str:
    '''Date metadata is dropped so equal inputs give equal files'''
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f'{name}.svg')
    plt.rcParams['svg.hashsalt'] = 'postselect'
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    return path


def plot_sweep(panels: Dict[str, pd.DataFrame], x: str, columns: List[str], title: str):
    '''One log-x panel per table, one curve per column'''
    fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4), squeeze=False)
    for ax, (label, df) in zip(axes[0], panels.items()):
        for column in columns:
            ax.plot(df[x], df[column], label=column)
        ax.set_xscale('log')
        ax.set_xlabel(x)
        ax.set_title(label)
        ax.legend()
    fig.suptitle(title)
    fig.tight_layout()
    return fig


def print_summary(title: str, assertions: Sequence[Dict], outputs: Sequence[str]):
    '''Banner with PASS/FAIL colouring per assertion'''
    print("\n" + "=" * 60)
    print(title.upper())
    print("=" * 60)
    for a in assertions:
        colour = Fore.GREEN if a['passed'] else Fore.RED
        status = 'PASS' if a['passed'] else 'FAIL'
        print(f"{colour}{status}{Style.RESET_ALL} {a['name']}: {a['measured']:.6g} {a['relation']} {a['expected']:.6g}")
    for path in outputs:
        print(f"  -> {path}")
    passed = sum(1 for a in assertions if a['passed'])
    colour = Fore.GREEN if passed == len(assertions) else Fore.RED
    print(f"{colour}{passed}/{len(assertions)} assertions passed{Style.RESET_ALL}")
