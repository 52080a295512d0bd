// Two-segment arm rendering. The pose math is exported separately from the
// canvas drawing so the geometry can be unit tested.

export interface ArmPose {
  shoulder: [number, number];
  elbow: [number, number];
  wrist: [number, number];
}

const DEG = Math.PI / 180;

// Upper arm hangs at a fixed 40 degrees below horizontal; the forearm rotates
// about the elbow by the decoded flexion angle. Zero flexion keeps the forearm
// in line with the upper arm; 150 folds it back toward the shoulder.
export function armPose(
  elbowAngleDeg: number,
  upperLen: number,
  foreLen: number,
  shoulder: [number, number] = [0, 0]
): ArmPose {
  const upperDir = -50 * DEG; // screen coordinates: y grows downward
  const elbow: [number, number] = [
    shoulder[0] + upperLen * Math.cos(upperDir),
    shoulder[1] - upperLen * Math.sin(upperDir),
  ];
  const foreDir = upperDir + elbowAngleDeg * DEG;
  const wrist: [number, number] = [
    elbow[0] + foreLen * Math.cos(foreDir),
    elbow[1] - foreLen * Math.sin(foreDir),
  ];
  return { shoulder, elbow, wrist };
}

export function drawArm(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  elbowAngleDeg: number
): void {
  ctx.clearRect(0, 0, width, height);
  const upperLen = height * 0.34;
  const foreLen = height * 0.3;
  const pose = armPose(elbowAngleDeg, upperLen, foreLen, [
    width * 0.38,
    height * 0.22,
  ]);

  ctx.lineCap = 'round';
  ctx.lineJoin = 'round';

  ctx.strokeStyle = '#51617a';
  ctx.lineWidth = 14;
  ctx.beginPath();
  ctx.moveTo(pose.shoulder[0], pose.shoulder[1]);
  ctx.lineTo(pose.elbow[0], pose.elbow[1]);
  ctx.stroke();

  ctx.strokeStyle = '#7e9cc4';
  ctx.beginPath();
  ctx.moveTo(pose.elbow[0], pose.elbow[1]);
  ctx.lineTo(pose.wrist[0], pose.wrist[1]);
  ctx.stroke();

  ctx.fillStyle = '#2e3a4e';
  for (const [x, y] of [pose.shoulder, pose.elbow, pose.wrist]) {
    ctx.beginPath();
    ctx.arc(x, y, 8, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.fillStyle = '#1d2633';
  ctx.font = '28px system-ui, sans-serif';
  ctx.fillText(`${elbowAngleDeg.toFixed(1)}°`, width * 0.66, height * 0.14);
}
