#!/usr/bin/env python3
# pyright: strict
# pyright: reportUnusedVariable=none, reportMissingImports=warning
"""
Environment and Sanity Checks Module
=====================================

Validates the Python version, numerical dependencies and environment
overrides before a run.
"""

import importlib
import os
import sys
from pathlib import Path
from typing import List, Tuple

REQUIRED_MODULES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "pandas": "pandas",
    "pydantic": "pydantic",
    "dotenv": "python-dotenv",
}


def check_dependencies() -> Tuple[bool, List[str]]:
    """
    Check if required third-party dependencies are installed.

    Returns:
        Tuple of (has_all_deps, missing_packages)
    """
    missing: List[str] = []
    for module, package in REQUIRED_MODULES.items():
        try:
            importlib.import_module(module)
        except ImportError:
            missing.append(package)
    return (len(missing) == 0, missing)


def validate_environment(project_root: Path) -> Tuple[bool, List[str]]:
    """
    Validate optional environment overrides.

    Args:
        project_root: Root directory of the project

    Returns:
        Tuple of (is_valid, problems)
    """
    try:
        from dotenv import load_dotenv
        load_dotenv(project_root / ".env.local")
    except ImportError:
        pass  # reported by check_dependencies

    problems: List[str] = []

    dense_limit = os.getenv("EIGENPRICE_DENSE_LIMIT")
    if dense_limit is not None and not dense_limit.isdigit():
        problems.append("EIGENPRICE_DENSE_LIMIT (must be a positive integer)")

    log_level = os.getenv("LOG_LEVEL")
    if log_level is not None and log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        problems.append("LOG_LEVEL (DEBUG, INFO, WARNING, ERROR or CRITICAL)")

    return (len(problems) == 0, problems)


def check_python_version(min_version: Tuple[int, int] = (3, 11)) -> bool:
    """
    Check if Python version meets minimum requirements (tomllib needs 3.11).

    Args:
        min_version: Minimum required version as (major, minor)

    Returns:
        True if version is sufficient
    """
    return sys.version_info >= min_version


def run_sanity_checks(project_root: Path) -> bool:
    """
    Run all sanity checks and report results.

    Args:
        project_root: Root directory of the project

    Returns:
        True if all checks pass
    """
    all_passed = True

    if not check_python_version():
        print("❌ Python version too old. Requires Python 3.11+")
        all_passed = False
    else:
        print(f"✅ Python version: {sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}")

    has_deps, missing_deps = check_dependencies()
    if not has_deps:
        print(f"❌ Missing dependencies: {', '.join(missing_deps)}")
        print("   Install with: pip install -r scripts/requirements.txt")
        all_passed = False
    else:
        print("✅ All dependencies installed")

    env_valid, problems = validate_environment(project_root)
    if not env_valid:
        print(f"❌ Invalid environment variables: {', '.join(problems)}")
        print("   Fix them in .env.local or unset them")
        all_passed = False
    else:
        print("✅ Environment variables valid")

    return all_passed
