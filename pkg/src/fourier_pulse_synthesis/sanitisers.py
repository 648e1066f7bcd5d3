import pandas as pd


def _column_name_sanitiser(columns: pd.Index | pd.Series) -> pd.Index | pd.Series:
    """
    Sanitises column names by:
    1. Removing a leading byte order mark left by some spreadsheet exports
    2. Removing 'versioning' from column names introduced by `mangle_dupe_cols` in
    pandas parser, e.g. 'Mx.1' is sanitised to 'Mx'
    3. Stripping leading and trailing whitespaces
    """
    columns = columns.astype(str)
    columns = columns.str.replace("\ufeff", "", regex=False)
    columns = columns.str.replace(r"\.\d+$", "", regex=True)
    columns = columns.str.strip()
    return columns


def _values_casting_and_sanitisation(df: pd.DataFrame) -> pd.DataFrame:
    """Attempts to convert `pd.DataFrame` values to floats. If this fails, sanitises
    strings in the same column and then re-attempts casting.

    Columns that still cannot be cast are left as they are, so the caller can report
    which column is malformed.
    """
    df = _replace_dataframe_blanks_with_na(df)
    for object_col in df.dtypes[df.dtypes == "object"].keys():
        try:
            df[object_col] = pd.to_numeric(df[object_col]).astype(float)
        except (ValueError, TypeError):
            where_str_values = df[object_col].apply(lambda x: isinstance(x, str))
            if not df.loc[where_str_values, object_col].empty:
                for series_func in (
                    _strip_series_whitespaces,
                    _replace_series_unicode_minus,
                ):
                    df.loc[where_str_values, object_col] = series_func(df[object_col])
            # re-attempt conversion following sanitisation
            try:
                df[object_col] = pd.to_numeric(df[object_col]).astype(float)
            except (ValueError, TypeError):
                pass
    return df


def _replace_dataframe_blanks_with_na(df: pd.DataFrame) -> pd.DataFrame:
    """Replaces empty or whitespace-only string values with `pandas.NA`"""
    return df.replace(r"^\s*$", pd.NA, regex=True)


def _strip_series_whitespaces(series: pd.Series) -> pd.Series:
    """Strips leading and trailing whitespaces in a `pandas.Series`"""
    return series.str.strip()


def _replace_series_unicode_minus(series: pd.Series) -> pd.Series:
    """Replaces the unicode minus sign with an ASCII hyphen-minus"""
    return series.str.replace("\u2212", "-", regex=False)
