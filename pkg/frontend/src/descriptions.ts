/** Human-readable names for the standard diagnostic codes; unknown codes
 * fall back to the code itself. */
const DESCRIPTIONS: Record<string, string> = {
  "1AVB": "first degree AV block",
  "2AVB": "second degree AV block",
  "3AVB": "third degree AV block",
  AFIB: "atrial fibrillation",
  AFLT: "atrial flutter",
  BIGU: "bigeminal pattern (unknown origin, SV or ventricular)",
  IVCD: "nonspecific intraventricular conduction disturbance",
  PACE: "artificial pacemaker",
  PSVT: "paroxysmal supraventricular tachycardia",
  SARRH: "sinus arrhythmia",
  SBRAD: "sinus bradycardia",
  SR: "sinus rhythm",
  STACH: "sinus tachycardia",
  SVARR: "supraventricular arrhythmia",
  SVTAC: "supraventricular tachycardia",
  TRIGU: "trigeminal pattern (unknown origin, SV or ventricular)",
  ABQRS: "abnormal QRS",
  ALMI: "anterolateral myocardial infarction",
  AMI: "anterior myocardial infarction",
  ANEUR: "ST-T changes from ventricular aneurysm",
  ASMI: "anteroseptal myocardial infarction",
  CLBBB: "complete left bundle branch block",
  CRBBB: "complete right bundle branch block",
  HVOLT: "high QRS voltage",
  ILBBB: "incomplete left bundle branch block",
  ILMI: "inferolateral myocardial infarction",
  IMI: "inferior myocardial infarction",
  INJAL: "injury in anterolateral leads",
  INJAS: "injury in anteroseptal leads",
  INJIL: "injury in inferolateral leads",
  INJIN: "injury in inferior leads",
  INJLA: "injury in lateral leads",
  INVT: "inverted T waves",
  IPLMI: "inferoposterolateral myocardial infarction",
  IPMI: "inferoposterior myocardial infarction",
  IRBBB: "incomplete right bundle branch block",
  ISCAL: "ischemia in anterolateral leads",
  ISCAN: "ischemia in anterior leads",
  ISCAS: "ischemia in anteroseptal leads",
  ISCIL: "ischemia in inferolateral leads",
  ISCIN: "ischemia in inferior leads",
  ISCLA: "ischemia in lateral leads",
  ISC_: "nonspecific ischemia",
  LAFB: "left anterior fascicular block",
  "LAO/LAE": "left atrial overload/enlargement",
  LMI: "lateral myocardial infarction",
  LNGQT: "long QT interval",
  LOWT: "low amplitude T waves",
  LPFB: "left posterior fascicular block",
  LPR: "prolonged PR interval",
  LVH: "left ventricular hypertrophy",
  LVOLT: "low QRS voltage",
  NDT: "nondiagnostic T abnormalities",
  NST_: "nonspecific ST changes",
  NT_: "nonspecific T wave changes",
  PAC: "premature atrial complex",
  PMI: "posterior myocardial infarction",
  "PRC(S)": "premature complexes",
  PVC: "premature ventricular complex",
  QWAVE: "Q waves present",
  "RAO/RAE": "right atrial overload/enlargement",
  RVH: "right ventricular hypertrophy",
  SEHYP: "septal hypertrophy",
  STD_: "ST depression",
  STE_: "ST elevation",
  TAB_: "T wave abnormality",
  VCLVH: "voltage criteria for LVH",
  WPW: "Wolff-Parkinson-White syndrome",
  DIG: "digitalis effect",
  EL: "electrolyte disturbance or drug effect",
  NORM: "normal ECG",
};

export function describe(code: string): string {
  return DESCRIPTIONS[code] ?? code;
}
