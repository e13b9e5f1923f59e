import warnings
from importlib import metadata
from platform import python_version

__version__ = "0.1.0"

# distribution name, label in the version report
DEPENDENCIES = (
    ("numpy", "Numpy"),
    ("scipy", "Scipy"),
    ("numba", "Numba"),
    ("pandas", "Pandas"),
    ("matplotlib", "Matplotlib"),
)
OPTIONAL_DEPENDENCIES = (("tqdm", "Tqdm"),)


def _installed_version(package):
    try:
        return metadata.version(package)
    except metadata.PackageNotFoundError:
        return "Not Installed"


def show_versions(optional=True) -> None:
    """Print the version of dgnflow, Python and the numerical stack.

    Parameters
    ----------
    optional : bool, optional
        Also list the optional packages used for parallel sweeps, by
        default True
    """
    packages = DEPENDENCIES + (OPTIONAL_DEPENDENCIES if optional else ())
    lines = [f"{'dgnflow version':<19}: {__version__}", ""]
    lines.append(f"{'Python version':<19}: {python_version()}")
    for package, label in packages:
        lines.append(f"{label + ' version':<19}: {_installed_version(package)}")
    print("\n".join(lines))


def check_tqdm_parallel(parallel):
    """Resolve the thread pool used to run sweep cells concurrently.

    Parameters
    ----------
    parallel : bool
        Whether more than one worker was requested.

    Returns
    -------
    parallel : bool
        False when tqdm is missing, so the sweep runs its cells one by one.
    thread_map : function or None
        ``tqdm.contrib.concurrent.thread_map`` when running in parallel.
    tqdm : class or None
        Progress bar class passed on to ``thread_map``.
    """
    if not parallel:
        return False, None, None
    try:
        from tqdm import tqdm
        from tqdm.contrib.concurrent import thread_map
    except ImportError:
        warnings.warn(
            "--jobs above 1 needs 'tqdm' (pip install 'dgnflow[parallel]'); "
            "running the sweep cells serially",
            category=ImportWarning,
            stacklevel=2,
        )
        return False, None, None
    return True, thread_map, tqdm
