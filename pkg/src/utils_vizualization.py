import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import textwrap  # noqa: E402

from src.utils import atomic_write  # noqa: E402

# Fixed metadata keeps the SVG bytes reproducible.
SVG_METADATA = {'Date': None, 'Creator': None}


def _save(fig, out_path):
    plt.rcParams['svg.hashsalt'] = 'distributed-l0'
    with atomic_write(out_path) as handle:
        fig.savefig(handle, format='svg', metadata=SVG_METADATA)
    plt.close(fig)


def plot_traces(frames, labels, out_path, y='consensus_error', logy=True, title=None):
    """
    One polyline per trace, y column against round t. Saves an SVG to out_path.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for df, label in zip(frames, labels):
        ax.plot(df['t'], df[y], label=label, linewidth=1.5)
    if logy:
        ax.set_yscale('log')
    ax.set_xlabel('iteration t')
    ax.set_ylabel(y.replace('_', ' '))
    if title:
        ax.set_title('\n'.join(textwrap.wrap(title, 60)), fontsize=8)
    ax.legend(loc='upper right', fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def plot_bands(summary, out_path, logy=True, title=None):
    """
    Mean consensus error as a bold line with its 95% confidence band shaded, one per setting.

    `summary` has columns setting, t, mean, lower, upper.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for setting, df in summary.groupby('setting', sort=False):
        line, = ax.plot(df['t'], df['mean'], linewidth=2, label=setting)
        lower = df['lower'].clip(lower=df['mean'].min() * 1e-3) if logy else df['lower']
        ax.fill_between(df['t'], lower, df['upper'], color=line.get_color(), alpha=0.2, linewidth=0)
    if logy:
        ax.set_yscale('log')
    ax.set_xlabel('iteration t')
    ax.set_ylabel('consensus error')
    if title:
        ax.set_title('\n'.join(textwrap.wrap(title, 60)), fontsize=8)
    ax.legend(loc='upper right', fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)
